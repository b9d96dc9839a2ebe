// SPDX-License-Identifier: Apache-2.0
//
// gfbeam - grid-free MIMO beam alignment simulator and training library
// Copyright (C) 2026 The gfbeam authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef gfbeam_diffgraph_H
#define gfbeam_diffgraph_H

#include "gfbeam/types.hpp"

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

// Reverse-mode differentiation over dense real matrices (float64). Complex
// quantities are carried as explicit real/imaginary pairs (CVar).
//
// A Tape records nodes in creation order. Parents always precede their
// children, so reverse creation order is a valid topological order and the
// gradient accumulation order is fixed.
namespace gfbeam::diff
{
    using Tensor = Eigen::MatrixXd;

    class Tape;

    class Var
    {
    public:
        Var() = default;

        bool valid() const { return tape_ != nullptr; }
        int id() const { return id_; }
        Tape *tape() const { return tape_; }

        const Tensor &value() const;
        const Tensor &grad() const;
        Eigen::Index rows() const { return value().rows(); }
        Eigen::Index cols() const { return value().cols(); }
        double item() const; // value of a 1x1 node

    private:
        friend class Tape;
        Var(Tape *t, int id) : tape_(t), id_(id) {}
        Tape *tape_ = nullptr;
        int id_ = -1;
    };

    // Named trainable tensors with stable (insertion) order.
    class ParamBlock
    {
    public:
        void add(const std::string &name, Tensor value);
        bool contains(std::string_view name) const;
        Tensor &operator[](std::string_view name);
        const Tensor &operator[](std::string_view name) const;
        Tensor &at(std::size_t i) { return values_.at(i); }
        const Tensor &at(std::size_t i) const { return values_.at(i); }
        std::size_t index_of(std::string_view name) const;
        const std::vector<std::string> &names() const { return names_; }
        std::size_t size() const { return values_.size(); }
        std::size_t scalar_count() const;
        bool all_finite() const;

    private:
        std::vector<std::string> names_;
        std::vector<Tensor> values_;
        std::unordered_map<std::string, std::size_t> index_;
    };

    // One gradient tensor per ParamBlock entry, same order.
    using Gradients = std::vector<Tensor>;

    class Tape
    {
    public:
        using BackwardFn = std::function<void(Tape &, int)>;

        Tape() = default;
        Tape(const Tape &) = delete;
        Tape &operator=(const Tape &) = delete;

        Var constant(Tensor value);
        Var scalar(double v);
        Var leaf(Tensor value); // differentiable input not owned by a ParamBlock

        // Creates one leaf per block entry (same order).
        std::vector<Var> bind(const ParamBlock &block);

        // Records an op node. requires_grad is inferred from the parents.
        Var push(Tensor value, std::vector<int> parents, BackwardFn backward);

        void backward(const Var &loss);
        Gradients gradients(std::span<const Var> leaves) const;

        const Tensor &value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
        const Tensor &grad(int id) const { return nodes_[static_cast<std::size_t>(id)].grad; }
        Tensor &grad_mut(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
        bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
        std::size_t size() const { return nodes_.size(); }

    private:
        struct Node
        {
            Tensor value;
            Tensor grad;
            std::vector<int> parents;
            BackwardFn backward;
            bool requires_grad = false;
        };
        std::vector<Node> nodes_;
        bool backward_done_ = false;
    };

    struct CVar
    {
        Var re, im;
        Eigen::Index rows() const { return re.rows(); }
        Eigen::Index cols() const { return re.cols(); }
    };

    // ---- real ops ----
    Var matmul(const Var &a, const Var &b);
    Var add(const Var &a, const Var &b);
    Var sub(const Var &a, const Var &b);
    Var mul(const Var &a, const Var &b); // elementwise
    Var div(const Var &a, const Var &b); // elementwise
    Var neg(const Var &a);
    Var scale(const Var &a, double s);
    Var relu(const Var &a);
    Var square(const Var &a);
    Var sqrt(const Var &a);
    Var sum(const Var &a);
    Var mean(const Var &a);
    Var diag(const Var &a); // square matrix -> column of its diagonal
    Var transpose(const Var &a);
    Var concat_cols(std::span<const Var> parts);
    Var concat_rows(std::span<const Var> parts);
    Var slice_cols(const Var &a, Eigen::Index start, Eigen::Index count);
    Var log10_safe(const Var &a, double floor = 1e-30);
    Var max_const(const Var &a, double c);
    Var row_sum(const Var &a);
    Var row_max(const Var &a); // ties resolve to the lowest column
    Var add_row(const Var &a, const Var &row); // a + 1 x C row broadcast down the rows
    Var mul_row(const Var &a, const Var &row);
    Var mul_col(const Var &a, const Var &col); // a .* (B x 1 column broadcast across columns)
    Var expand_cols(const Var &a, Eigen::Index times); // out(:, i*times + j) = a(:, i)
    Var tile_cols(const Var &a, Eigen::Index times);   // out(:, i*C + j) = a(:, j)
    Var column_blocks(const Var &a);                   // N x K -> NK x K, column k in row block k

    // Mean over rows of the softmax cross-entropy with integer labels.
    Var cross_entropy(const Var &logits, std::span<const int> labels);

    // ---- complex ops on (re, im) pairs ----
    CVar cconstant(Tape &t, const CMatrix &m);
    CVar cmatmul(const CVar &a, const CVar &b); // four real matmuls
    CVar cmul(const CVar &a, const CVar &b);    // elementwise
    CVar cadd(const CVar &a, const CVar &b);
    CVar conj(const CVar &a);
    CVar ctranspose(const CVar &a); // plain transpose, no conjugation
    CVar cscale(const CVar &a, double s);
    Var abs2(const CVar &a);       // squared modulus
    Var cabs(const CVar &a);       // modulus; gradient 0 at the origin
    CVar modulus_normalize(const CVar &a, double n); // a / (max(|a|, 1e-12) sqrt(n)); 0 -> 1/sqrt(n)
    CVar kron_conj_rows(const CVar &a, const CVar &b); // out(r, i*Cb + j) = conj(a(r,i)) b(r,j)
    CVar ccolumn_blocks(const CVar &a);
    CVar cslice_cols(const CVar &a, Eigen::Index start, Eigen::Index count);
    CMatrix cvalue(const CVar &a);

    // ---- checking ----
    using LossBuilder = std::function<Var(Tape &, std::span<const Var>)>;

    struct LossAndGrad
    {
        double loss = 0.0;
        Gradients grads;
    };

    LossAndGrad value_and_grad(const LossBuilder &build, const ParamBlock &params);

    struct GradCheckResult
    {
        double max_rel_error = 0.0;
        std::string worst_param;
        Eigen::Index worst_index = -1;
    };

    // Central differences on every coordinate; relative error
    // |g_ad - g_fd| / max(1e-8, |g_ad| + |g_fd|).
    GradCheckResult grad_check(const LossBuilder &build, const ParamBlock &params, double step);
}

#endif
