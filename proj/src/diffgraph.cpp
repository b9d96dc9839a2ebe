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

#include "gfbeam/diffgraph.hpp"

#include <algorithm>
#include <cmath>

namespace gfbeam::diff
{
    namespace
    {
        constexpr double kModulusEps = 1e-12;

        std::string shape(const Tensor &t)
        {
            return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
        }

        [[noreturn]] void shape_error(const char *op, const Tensor &a, const Tensor &b)
        {
            throw ConfigError(std::string(op) + ": shape mismatch " + shape(a) + " vs " + shape(b));
        }

        Tape &tape_of(const Var &a, const char *op)
        {
            if (!a.valid())
                throw ConfigError(std::string(op) + ": uninitialized variable");
            return *a.tape();
        }

        Tape &tape_of(const Var &a, const Var &b, const char *op)
        {
            Tape &t = tape_of(a, op);
            if (&tape_of(b, op) != &t)
                throw ConfigError(std::string(op) + ": operands live on different tapes");
            return t;
        }

        void same_shape(const char *op, const Var &a, const Var &b)
        {
            if (a.rows() != b.rows() || a.cols() != b.cols())
                shape_error(op, a.value(), b.value());
        }
    }

    // ------------------------------------------------------------------ Var

    const Tensor &Var::value() const { return tape_->value(id_); }
    const Tensor &Var::grad() const { return tape_->grad(id_); }

    double Var::item() const
    {
        const Tensor &v = value();
        if (v.size() != 1)
            throw ConfigError("item(): node is not a scalar " + shape(v));
        return v(0, 0);
    }

    // ------------------------------------------------------------------ ParamBlock

    void ParamBlock::add(const std::string &name, Tensor value)
    {
        if (index_.count(name))
            throw ConfigError("ParamBlock: duplicate parameter name '" + name + "'");
        index_.emplace(name, values_.size());
        names_.push_back(name);
        values_.push_back(std::move(value));
    }

    bool ParamBlock::contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

    std::size_t ParamBlock::index_of(std::string_view name) const
    {
        auto it = index_.find(std::string(name));
        if (it == index_.end())
            throw ConfigError("ParamBlock: unknown parameter '" + std::string(name) + "'");
        return it->second;
    }

    Tensor &ParamBlock::operator[](std::string_view name) { return values_[index_of(name)]; }
    const Tensor &ParamBlock::operator[](std::string_view name) const { return values_[index_of(name)]; }

    std::size_t ParamBlock::scalar_count() const
    {
        std::size_t n = 0;
        for (const auto &v : values_)
            n += static_cast<std::size_t>(v.size());
        return n;
    }

    bool ParamBlock::all_finite() const
    {
        return std::all_of(values_.begin(), values_.end(), [](const Tensor &t) { return t.allFinite(); });
    }

    // ------------------------------------------------------------------ Tape

    Var Tape::constant(Tensor value)
    {
        nodes_.push_back(Node{std::move(value), {}, {}, {}, false});
        return Var(this, static_cast<int>(nodes_.size() - 1));
    }

    Var Tape::scalar(double v) { return constant(Tensor::Constant(1, 1, v)); }

    Var Tape::leaf(Tensor value)
    {
        nodes_.push_back(Node{std::move(value), {}, {}, {}, true});
        return Var(this, static_cast<int>(nodes_.size() - 1));
    }

    std::vector<Var> Tape::bind(const ParamBlock &block)
    {
        std::vector<Var> out;
        out.reserve(block.size());
        for (std::size_t i = 0; i < block.size(); ++i)
            out.push_back(leaf(block.at(i)));
        return out;
    }

    Var Tape::push(Tensor value, std::vector<int> parents, BackwardFn backward)
    {
        const int self = static_cast<int>(nodes_.size());
        bool rg = false;
        for (int p : parents)
        {
            if (p < 0 || p >= self)
                throw NumericalError("Tape: cycle or dangling parent detected at node " + std::to_string(self));
            rg = rg || nodes_[static_cast<std::size_t>(p)].requires_grad;
        }
        nodes_.push_back(Node{std::move(value), {}, std::move(parents), rg ? std::move(backward) : BackwardFn{}, rg});
        return Var(this, self);
    }

    void Tape::backward(const Var &loss)
    {
        if (loss.tape() != this)
            throw ConfigError("backward: loss belongs to another tape");
        if (loss.value().size() != 1)
            throw ConfigError("backward: loss must be a scalar, got " + shape(loss.value()));
        if (backward_done_)
            throw ConfigError("backward: tape was already differentiated");
        backward_done_ = true;

        const auto last = static_cast<std::size_t>(loss.id());
        for (std::size_t i = 0; i <= last; ++i)
        {
            Node &n = nodes_[i];
            if (n.requires_grad)
                n.grad = Tensor::Zero(n.value.rows(), n.value.cols());
            for (int p : n.parents)
                if (static_cast<std::size_t>(p) >= i)
                    throw NumericalError("backward: cycle detected at node " + std::to_string(i));
        }
        if (!nodes_[last].requires_grad)
            return;
        nodes_[last].grad(0, 0) = 1.0;
        for (std::size_t i = last + 1; i-- > 0;)
        {
            Node &n = nodes_[i];
            if (n.requires_grad && n.backward)
                n.backward(*this, static_cast<int>(i));
        }
    }

    Gradients Tape::gradients(std::span<const Var> leaves) const
    {
        Gradients out;
        out.reserve(leaves.size());
        for (const auto &v : leaves)
        {
            const Node &n = nodes_[static_cast<std::size_t>(v.id())];
            out.push_back(n.grad.size() ? n.grad : Tensor::Zero(n.value.rows(), n.value.cols()));
        }
        return out;
    }

    // ------------------------------------------------------------------ real ops

    Var matmul(const Var &a, const Var &b)
    {
        Tape &t = tape_of(a, b, "matmul");
        if (a.cols() != b.rows())
            shape_error("matmul", a.value(), b.value());
        const int ia = a.id(), ib = b.id();
        return t.push(a.value() * b.value(), {ia, ib}, [ia, ib](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            if (t.requires_grad(ia))
                t.grad_mut(ia).noalias() += g * t.value(ib).transpose();
            if (t.requires_grad(ib))
                t.grad_mut(ib).noalias() += t.value(ia).transpose() * g;
        });
    }

    Var add(const Var &a, const Var &b)
    {
        Tape &t = tape_of(a, b, "add");
        same_shape("add", a, b);
        const int ia = a.id(), ib = b.id();
        return t.push(a.value() + b.value(), {ia, ib}, [ia, ib](Tape &t, int self) {
            if (t.requires_grad(ia))
                t.grad_mut(ia) += t.grad(self);
            if (t.requires_grad(ib))
                t.grad_mut(ib) += t.grad(self);
        });
    }

    Var sub(const Var &a, const Var &b)
    {
        Tape &t = tape_of(a, b, "sub");
        same_shape("sub", a, b);
        const int ia = a.id(), ib = b.id();
        return t.push(a.value() - b.value(), {ia, ib}, [ia, ib](Tape &t, int self) {
            if (t.requires_grad(ia))
                t.grad_mut(ia) += t.grad(self);
            if (t.requires_grad(ib))
                t.grad_mut(ib) -= t.grad(self);
        });
    }

    Var mul(const Var &a, const Var &b)
    {
        Tape &t = tape_of(a, b, "mul");
        same_shape("mul", a, b);
        const int ia = a.id(), ib = b.id();
        return t.push(a.value().cwiseProduct(b.value()), {ia, ib}, [ia, ib](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            if (t.requires_grad(ia))
                t.grad_mut(ia) += g.cwiseProduct(t.value(ib));
            if (t.requires_grad(ib))
                t.grad_mut(ib) += g.cwiseProduct(t.value(ia));
        });
    }

    Var div(const Var &a, const Var &b)
    {
        Tape &t = tape_of(a, b, "div");
        same_shape("div", a, b);
        const int ia = a.id(), ib = b.id();
        return t.push(a.value().cwiseQuotient(b.value()), {ia, ib}, [ia, ib](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            const Tensor &bv = t.value(ib);
            if (t.requires_grad(ia))
                t.grad_mut(ia) += g.cwiseQuotient(bv);
            if (t.requires_grad(ib))
                t.grad_mut(ib) -= g.cwiseProduct(t.value(ia)).cwiseQuotient(bv.cwiseProduct(bv));
        });
    }

    Var neg(const Var &a) { return scale(a, -1.0); }

    Var scale(const Var &a, double s)
    {
        Tape &t = tape_of(a, "scale");
        const int ia = a.id();
        return t.push(a.value() * s, {ia}, [ia, s](Tape &t, int self) { t.grad_mut(ia) += s * t.grad(self); });
    }

    Var relu(const Var &a)
    {
        Tape &t = tape_of(a, "relu");
        const int ia = a.id();
        return t.push(a.value().cwiseMax(0.0), {ia}, [ia](Tape &t, int self) {
            // subgradient 0 at the kink
            t.grad_mut(ia) += (t.value(ia).array() > 0.0).select(t.grad(self), 0.0);
        });
    }

    Var square(const Var &a)
    {
        Tape &t = tape_of(a, "square");
        const int ia = a.id();
        return t.push(a.value().cwiseAbs2(), {ia}, [ia](Tape &t, int self) {
            t.grad_mut(ia) += 2.0 * t.grad(self).cwiseProduct(t.value(ia));
        });
    }

    Var sqrt(const Var &a)
    {
        Tape &t = tape_of(a, "sqrt");
        const int ia = a.id();
        return t.push(a.value().cwiseSqrt(), {ia}, [ia](Tape &t, int self) {
            const auto y = t.value(self).array();
            t.grad_mut(ia).array() += (y > 0.0).select(t.grad(self).array() / (2.0 * y), 0.0);
        });
    }

    Var sum(const Var &a)
    {
        Tape &t = tape_of(a, "sum");
        const int ia = a.id();
        return t.push(Tensor::Constant(1, 1, a.value().sum()), {ia},
                      [ia](Tape &t, int self) { t.grad_mut(ia).array() += t.grad(self)(0, 0); });
    }

    Var mean(const Var &a)
    {
        Tape &t = tape_of(a, "mean");
        if (a.value().size() == 0)
            throw ConfigError("mean: empty tensor");
        const int ia = a.id();
        const double n = static_cast<double>(a.value().size());
        return t.push(Tensor::Constant(1, 1, a.value().sum() / n), {ia},
                      [ia, n](Tape &t, int self) { t.grad_mut(ia).array() += t.grad(self)(0, 0) / n; });
    }

    Var diag(const Var &a)
    {
        Tape &t = tape_of(a, "diag");
        if (a.rows() != a.cols())
            throw ConfigError("diag: expected a square matrix, got " + shape(a.value()));
        const int ia = a.id();
        return t.push(a.value().diagonal(), {ia}, [ia](Tape &t, int self) {
            t.grad_mut(ia).diagonal() += t.grad(self).col(0);
        });
    }

    Var transpose(const Var &a)
    {
        Tape &t = tape_of(a, "transpose");
        const int ia = a.id();
        return t.push(a.value().transpose(), {ia},
                      [ia](Tape &t, int self) { t.grad_mut(ia) += t.grad(self).transpose(); });
    }

    Var concat_cols(std::span<const Var> parts)
    {
        if (parts.empty())
            throw ConfigError("concat_cols: no inputs");
        Tape &t = tape_of(parts[0], "concat_cols");
        Eigen::Index rows = parts[0].rows(), cols = 0;
        std::vector<int> ids;
        for (const auto &p : parts)
        {
            tape_of(parts[0], p, "concat_cols");
            if (p.rows() != rows)
                shape_error("concat_cols", parts[0].value(), p.value());
            cols += p.cols();
            ids.push_back(p.id());
        }
        Tensor out(rows, cols);
        Eigen::Index c = 0;
        for (const auto &p : parts)
        {
            out.middleCols(c, p.cols()) = p.value();
            c += p.cols();
        }
        auto parents = ids;
        return t.push(std::move(out), std::move(parents), [ids](Tape &t, int self) {
            Eigen::Index c = 0;
            for (int id : ids)
            {
                const auto w = t.value(id).cols();
                if (t.requires_grad(id))
                    t.grad_mut(id) += t.grad(self).middleCols(c, w);
                c += w;
            }
        });
    }

    Var concat_rows(std::span<const Var> parts)
    {
        if (parts.empty())
            throw ConfigError("concat_rows: no inputs");
        Tape &t = tape_of(parts[0], "concat_rows");
        Eigen::Index cols = parts[0].cols(), rows = 0;
        std::vector<int> ids;
        for (const auto &p : parts)
        {
            tape_of(parts[0], p, "concat_rows");
            if (p.cols() != cols)
                shape_error("concat_rows", parts[0].value(), p.value());
            rows += p.rows();
            ids.push_back(p.id());
        }
        Tensor out(rows, cols);
        Eigen::Index r = 0;
        for (const auto &p : parts)
        {
            out.middleRows(r, p.rows()) = p.value();
            r += p.rows();
        }
        auto parents = ids;
        return t.push(std::move(out), std::move(parents), [ids](Tape &t, int self) {
            Eigen::Index r = 0;
            for (int id : ids)
            {
                const auto h = t.value(id).rows();
                if (t.requires_grad(id))
                    t.grad_mut(id) += t.grad(self).middleRows(r, h);
                r += h;
            }
        });
    }

    Var slice_cols(const Var &a, Eigen::Index start, Eigen::Index count)
    {
        Tape &t = tape_of(a, "slice_cols");
        if (start < 0 || count < 0 || start + count > a.cols())
            throw ConfigError("slice_cols: columns [" + std::to_string(start) + ", " + std::to_string(start + count) +
                              ") out of range for " + shape(a.value()));
        const int ia = a.id();
        return t.push(a.value().middleCols(start, count), {ia}, [ia, start, count](Tape &t, int self) {
            t.grad_mut(ia).middleCols(start, count) += t.grad(self);
        });
    }

    Var log10_safe(const Var &a, double floor)
    {
        Tape &t = tape_of(a, "log10_safe");
        const int ia = a.id();
        Tensor out = a.value().cwiseMax(floor).array().log10().matrix();
        return t.push(std::move(out), {ia}, [ia, floor](Tape &t, int self) {
            const auto x = t.value(ia).array();
            t.grad_mut(ia).array() += (x > floor).select(t.grad(self).array() / (x * std::log(10.0)), 0.0);
        });
    }

    Var max_const(const Var &a, double c)
    {
        Tape &t = tape_of(a, "max_const");
        const int ia = a.id();
        return t.push(a.value().cwiseMax(c), {ia}, [ia, c](Tape &t, int self) {
            t.grad_mut(ia) += (t.value(ia).array() > c).select(t.grad(self), 0.0);
        });
    }

    Var row_sum(const Var &a)
    {
        Tape &t = tape_of(a, "row_sum");
        const int ia = a.id();
        return t.push(a.value().rowwise().sum(), {ia}, [ia](Tape &t, int self) {
            t.grad_mut(ia).colwise() += t.grad(self).col(0);
        });
    }

    Var row_max(const Var &a)
    {
        Tape &t = tape_of(a, "row_max");
        if (a.cols() == 0)
            throw ConfigError("row_max: no columns");
        const int ia = a.id();
        const Tensor &v = a.value();
        Tensor out(v.rows(), 1);
        std::vector<Eigen::Index> arg(static_cast<std::size_t>(v.rows()));
        for (Eigen::Index r = 0; r < v.rows(); ++r)
        {
            Eigen::Index best = 0;
            for (Eigen::Index c = 1; c < v.cols(); ++c)
                if (v(r, c) > v(r, best))
                    best = c;
            arg[static_cast<std::size_t>(r)] = best;
            out(r, 0) = v(r, best);
        }
        return t.push(std::move(out), {ia}, [ia, arg = std::move(arg)](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            Tensor &ga = t.grad_mut(ia);
            for (std::size_t r = 0; r < arg.size(); ++r)
                ga(static_cast<Eigen::Index>(r), arg[r]) += g(static_cast<Eigen::Index>(r), 0);
        });
    }

    Var add_row(const Var &a, const Var &row)
    {
        Tape &t = tape_of(a, row, "add_row");
        if (row.rows() != 1 || row.cols() != a.cols())
            shape_error("add_row", a.value(), row.value());
        const int ia = a.id(), ir = row.id();
        Tensor out = a.value().rowwise() + row.value().row(0);
        return t.push(std::move(out), {ia, ir}, [ia, ir](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            if (t.requires_grad(ia))
                t.grad_mut(ia) += g;
            if (t.requires_grad(ir))
                t.grad_mut(ir) += g.colwise().sum();
        });
    }

    Var mul_row(const Var &a, const Var &row)
    {
        Tape &t = tape_of(a, row, "mul_row");
        if (row.rows() != 1 || row.cols() != a.cols())
            shape_error("mul_row", a.value(), row.value());
        const int ia = a.id(), ir = row.id();
        Tensor out = a.value().array().rowwise() * row.value().row(0).array();
        return t.push(std::move(out), {ia, ir}, [ia, ir](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            if (t.requires_grad(ia))
                t.grad_mut(ia).array() += g.array().rowwise() * t.value(ir).row(0).array();
            if (t.requires_grad(ir))
                t.grad_mut(ir) += g.cwiseProduct(t.value(ia)).colwise().sum();
        });
    }

    Var mul_col(const Var &a, const Var &col)
    {
        Tape &t = tape_of(a, col, "mul_col");
        if (col.cols() != 1 || col.rows() != a.rows())
            shape_error("mul_col", a.value(), col.value());
        const int ia = a.id(), ic = col.id();
        Tensor out = a.value().array().colwise() * col.value().col(0).array();
        return t.push(std::move(out), {ia, ic}, [ia, ic](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            if (t.requires_grad(ia))
                t.grad_mut(ia).array() += g.array().colwise() * t.value(ic).col(0).array();
            if (t.requires_grad(ic))
                t.grad_mut(ic) += g.cwiseProduct(t.value(ia)).rowwise().sum();
        });
    }

    Var expand_cols(const Var &a, Eigen::Index times)
    {
        Tape &t = tape_of(a, "expand_cols");
        if (times < 1)
            throw ConfigError("expand_cols: repeat count must be positive");
        const int ia = a.id();
        const Tensor &v = a.value();
        Tensor out(v.rows(), v.cols() * times);
        for (Eigen::Index i = 0; i < v.cols(); ++i)
            out.middleCols(i * times, times) = v.col(i).replicate(1, times);
        return t.push(std::move(out), {ia}, [ia, times](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            Tensor &ga = t.grad_mut(ia);
            for (Eigen::Index i = 0; i < ga.cols(); ++i)
                ga.col(i) += g.middleCols(i * times, times).rowwise().sum();
        });
    }

    Var tile_cols(const Var &a, Eigen::Index times)
    {
        Tape &t = tape_of(a, "tile_cols");
        if (times < 1)
            throw ConfigError("tile_cols: repeat count must be positive");
        const int ia = a.id();
        return t.push(a.value().replicate(1, times), {ia}, [ia, times](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            Tensor &ga = t.grad_mut(ia);
            const auto c = ga.cols();
            for (Eigen::Index i = 0; i < times; ++i)
                ga += g.middleCols(i * c, c);
        });
    }

    Var column_blocks(const Var &a)
    {
        Tape &t = tape_of(a, "column_blocks");
        const int ia = a.id();
        const Tensor &v = a.value();
        const Eigen::Index n = v.rows(), k = v.cols();
        Tensor out = Tensor::Zero(n * k, k);
        for (Eigen::Index j = 0; j < k; ++j)
            out.block(j * n, j, n, 1) = v.col(j);
        return t.push(std::move(out), {ia}, [ia, n, k](Tape &t, int self) {
            const Tensor &g = t.grad(self);
            Tensor &ga = t.grad_mut(ia);
            for (Eigen::Index j = 0; j < k; ++j)
                ga.col(j) += g.block(j * n, j, n, 1);
        });
    }

    Var cross_entropy(const Var &logits, std::span<const int> labels)
    {
        Tape &t = tape_of(logits, "cross_entropy");
        const Tensor &z = logits.value();
        if (static_cast<Eigen::Index>(labels.size()) != z.rows() || z.rows() == 0)
            throw ConfigError("cross_entropy: " + std::to_string(labels.size()) + " labels for logits " + shape(z));
        Tensor prob(z.rows(), z.cols());
        double total = 0.0;
        for (Eigen::Index r = 0; r < z.rows(); ++r)
        {
            const int y = labels[static_cast<std::size_t>(r)];
            if (y < 0 || y >= z.cols())
                throw ConfigError("cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                                  std::to_string(z.cols()) + ")");
            const double m = z.row(r).maxCoeff();
            const auto e = (z.row(r).array() - m).exp();
            const double s = e.sum();
            prob.row(r) = e / s;
            total += (m + std::log(s)) - z(r, y);
        }
        const double n = static_cast<double>(z.rows());
        const int il = logits.id();
        std::vector<int> lab(labels.begin(), labels.end());
        return t.push(Tensor::Constant(1, 1, total / n), {il},
                      [il, prob = std::move(prob), lab = std::move(lab), n](Tape &t, int self) {
                          Tensor d = prob;
                          for (std::size_t r = 0; r < lab.size(); ++r)
                              d(static_cast<Eigen::Index>(r), lab[r]) -= 1.0;
                          t.grad_mut(il) += d * (t.grad(self)(0, 0) / n);
                      });
    }

    // ------------------------------------------------------------------ complex ops

    CVar cconstant(Tape &t, const CMatrix &m) { return {t.constant(m.real()), t.constant(m.imag())}; }

    CVar cmatmul(const CVar &a, const CVar &b)
    {
        return {sub(matmul(a.re, b.re), matmul(a.im, b.im)), add(matmul(a.re, b.im), matmul(a.im, b.re))};
    }

    CVar cmul(const CVar &a, const CVar &b)
    {
        return {sub(mul(a.re, b.re), mul(a.im, b.im)), add(mul(a.re, b.im), mul(a.im, b.re))};
    }

    CVar cadd(const CVar &a, const CVar &b) { return {add(a.re, b.re), add(a.im, b.im)}; }

    CVar conj(const CVar &a) { return {a.re, neg(a.im)}; }

    CVar ctranspose(const CVar &a) { return {transpose(a.re), transpose(a.im)}; }

    CVar cscale(const CVar &a, double s) { return {scale(a.re, s), scale(a.im, s)}; }

    Var abs2(const CVar &a) { return add(square(a.re), square(a.im)); }

    Var cabs(const CVar &a)
    {
        Tape &t = tape_of(a.re, a.im, "cabs");
        same_shape("cabs", a.re, a.im);
        const int ir = a.re.id(), ii = a.im.id();
        Tensor out = (a.re.value().array().square() + a.im.value().array().square()).sqrt().matrix();
        return t.push(std::move(out), {ir, ii}, [ir, ii](Tape &t, int self) {
            const auto m = t.value(self).array();
            const auto g = t.grad(self).array();
            if (t.requires_grad(ir))
                t.grad_mut(ir).array() += (m > 0.0).select(g * t.value(ir).array() / m, 0.0);
            if (t.requires_grad(ii))
                t.grad_mut(ii).array() += (m > 0.0).select(g * t.value(ii).array() / m, 0.0);
        });
    }

    CVar modulus_normalize(const CVar &a, double n)
    {
        Tape &t = tape_of(a.re, a.im, "modulus_normalize");
        same_shape("modulus_normalize", a.re, a.im);
        const int ir = a.re.id(), ii = a.im.id();
        const double inv_sqrt_n = 1.0 / std::sqrt(n);
        const auto re = a.re.value().array();
        const auto im = a.im.value().array();
        const Eigen::ArrayXXd m = (re.square() + im.square()).sqrt();
        const Eigen::ArrayXXd denom = m.cwiseMax(kModulusEps) * std::sqrt(n);
        Tensor out_re = (m == 0.0).select(inv_sqrt_n, re / denom).matrix();
        Tensor out_im = (m == 0.0).select(0.0, im / denom).matrix();

        // d(re/|a|)/d re = im^2/|a|^3, d(re/|a|)/d im = -re im/|a|^3, d(im/|a|)/d im = re^2/|a|^3.
        // Inside the clamp region the output is treated as constant.
        auto backward = [ir, ii, inv_sqrt_n](bool real_part) {
            return [ir, ii, inv_sqrt_n, real_part](Tape &t, int self) {
                const auto g = t.grad(self).array();
                const auto x = t.value(ir).array();
                const auto y = t.value(ii).array();
                const Eigen::ArrayXXd m2 = x.square() + y.square();
                const Eigen::ArrayXXd m = m2.sqrt();
                const Eigen::ArrayXXd active = (m > kModulusEps).cast<double>();
                const Eigen::ArrayXXd inv_m3 = active * inv_sqrt_n / (m2 * m).max(1e-300);
                if (real_part)
                {
                    if (t.requires_grad(ir))
                        t.grad_mut(ir).array() += g * y.square() * inv_m3;
                    if (t.requires_grad(ii))
                        t.grad_mut(ii).array() -= g * x * y * inv_m3;
                }
                else
                {
                    if (t.requires_grad(ir))
                        t.grad_mut(ir).array() -= g * x * y * inv_m3;
                    if (t.requires_grad(ii))
                        t.grad_mut(ii).array() += g * x.square() * inv_m3;
                }
            };
        };
        Var vr = t.push(std::move(out_re), {ir, ii}, backward(true));
        Var vi = t.push(std::move(out_im), {ir, ii}, backward(false));
        return {vr, vi};
    }

    CVar kron_conj_rows(const CVar &a, const CVar &b)
    {
        if (a.rows() != b.rows())
            shape_error("kron_conj_rows", a.re.value(), b.re.value());
        const CVar ea{expand_cols(a.re, b.cols()), expand_cols(a.im, b.cols())};
        const CVar tb{tile_cols(b.re, a.cols()), tile_cols(b.im, a.cols())};
        return cmul(conj(ea), tb);
    }

    CVar ccolumn_blocks(const CVar &a) { return {column_blocks(a.re), column_blocks(a.im)}; }

    CVar cslice_cols(const CVar &a, Eigen::Index start, Eigen::Index count)
    {
        return {slice_cols(a.re, start, count), slice_cols(a.im, start, count)};
    }

    CMatrix cvalue(const CVar &a)
    {
        CMatrix out(a.rows(), a.cols());
        out.real() = a.re.value();
        out.imag() = a.im.value();
        return out;
    }

    // ------------------------------------------------------------------ checking

    LossAndGrad value_and_grad(const LossBuilder &build, const ParamBlock &params)
    {
        Tape t;
        const auto leaves = t.bind(params);
        const Var loss = build(t, leaves);
        t.backward(loss);
        return {loss.item(), t.gradients(leaves)};
    }

    GradCheckResult grad_check(const LossBuilder &build, const ParamBlock &params, double step)
    {
        if (!(step > 0.0))
            throw ConfigError("grad_check: step must be positive");
        const auto analytic = value_and_grad(build, params);

        auto eval = [&](const ParamBlock &p) {
            Tape t;
            const auto leaves = t.bind(p);
            return build(t, leaves).item();
        };

        GradCheckResult res;
        ParamBlock probe = params;
        for (std::size_t k = 0; k < params.size(); ++k)
        {
            Tensor &x = probe.at(k);
            for (Eigen::Index i = 0; i < x.size(); ++i)
            {
                const double orig = x.data()[i];
                x.data()[i] = orig + step;
                const double up = eval(probe);
                x.data()[i] = orig - step;
                const double down = eval(probe);
                x.data()[i] = orig;

                const double fd = (up - down) / (2.0 * step);
                const double ad = analytic.grads[k].data()[i];
                const double rel = std::abs(ad - fd) / std::max(1e-8, std::abs(ad) + std::abs(fd));
                if (rel > res.max_rel_error)
                {
                    res.max_rel_error = rel;
                    res.worst_param = params.names()[k];
                    res.worst_index = i;
                }
            }
        }
        return res;
    }
}
