// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#include "occufield/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace occufield {

namespace {
Real stable_softplus(Real u) {
    return u > 0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}
}  // namespace

Tape::Tape(std::span<const Real> params)
    : params_(params), param_grad_(params.size(), Real(0)) {}

void Tape::clear() {
    nodes_.clear();
    values_.clear();
    grads_.clear();
    std::fill(param_grad_.begin(), param_grad_.end(), Real(0));
    backward_done_ = false;
}

Tape::Value Tape::push(Node n, int size) {
    n.off = int(values_.size());
    n.size = size;
    values_.resize(values_.size() + std::size_t(size), Real(0));
    nodes_.push_back(n);
    return Value{int(nodes_.size()) - 1, size};
}

std::span<Real> Tape::slot(int node) {
    const Node& n = nodes_[std::size_t(node)];
    return {values_.data() + n.off, std::size_t(n.size)};
}

std::span<const Real> Tape::slot(int node) const {
    const Node& n = nodes_[std::size_t(node)];
    return {values_.data() + n.off, std::size_t(n.size)};
}

std::span<Real> Tape::grad_slot(int node) {
    const Node& n = nodes_[std::size_t(node)];
    return {grads_.data() + n.off, std::size_t(n.size)};
}

void Tape::check_scalar(Value v, const char* what) {
    if (v.size != 1) throw std::logic_error(std::string(what) + ": scalar node required");
}

Tape::Value Tape::constant(Real v) {
    Value out = push({.op = Op::Const}, 1);
    slot(out.node)[0] = v;
    return out;
}

Tape::Value Tape::constant(std::span<const Real> v) {
    Value out = push({.op = Op::Const}, int(v.size()));
    std::copy(v.begin(), v.end(), slot(out.node).begin());
    return out;
}

Tape::Value Tape::constant3(const Vec3& v) {
    const Real buf[3] = {v.x, v.y, v.z};
    return constant(std::span<const Real>(buf, 3));
}

Tape::Value Tape::input(std::span<const Real> v) {
    Value out = push({.op = Op::Input}, int(v.size()));
    std::copy(v.begin(), v.end(), slot(out.node).begin());
    return out;
}

Tape::Value Tape::input3(const Vec3& v) {
    const Real buf[3] = {v.x, v.y, v.z};
    return input(std::span<const Real>(buf, 3));
}

Tape::Value Tape::param_vector(int offset, int n) {
    if (offset < 0 || std::size_t(offset + n) > params_.size())
        throw std::logic_error("param_vector: slice outside registry");
    Value out = push({.op = Op::ParamVec, .w_off = offset}, n);
    std::copy_n(params_.begin() + offset, n, slot(out.node).begin());
    return out;
}

Tape::Value Tape::affine(Value x, int w_offset, int b_offset, int rows) {
    const int cols = x.size;
    if (w_offset < 0 || std::size_t(w_offset + rows * cols) > params_.size())
        throw std::logic_error("affine: weight slice outside registry");
    if (b_offset >= 0 && std::size_t(b_offset + rows) > params_.size())
        throw std::logic_error("affine: bias slice outside registry");
    Node n{.op = Op::Affine, .a = x.node, .w_off = w_offset, .b_off = b_offset,
           .rows = rows, .cols = cols};
    Value out = push(n, rows);
    auto xv = slot(x.node);
    auto yv = slot(out.node);
    const Real* w = params_.data() + w_offset;
    for (int r = 0; r < rows; ++r) {
        Real acc = b_offset >= 0 ? params_[std::size_t(b_offset + r)] : Real(0);
        const Real* wr = w + std::size_t(r) * cols;
        for (int c = 0; c < cols; ++c) acc += wr[c] * xv[std::size_t(c)];
        yv[std::size_t(r)] = acc;
    }
    return out;
}

Tape::Value Tape::film(Value x, Value freq, Value phase) {
    if (x.size != freq.size || x.size != phase.size)
        throw std::logic_error("film: size mismatch");
    Node n{.op = Op::Film, .a = x.node, .b = freq.node, .c = phase.node};
    Value out = push(n, x.size);
    auto xv = slot(x.node), fv = slot(freq.node), pv = slot(phase.node);
    auto yv = slot(out.node);
    for (int i = 0; i < x.size; ++i)
        yv[std::size_t(i)] = std::sin(fv[std::size_t(i)] * xv[std::size_t(i)] + pv[std::size_t(i)]);
    return out;
}

Tape::Value Tape::unary(Op op, Value x, Real x0, Real x1) {
    Node n{.op = op, .a = x.node, .x0 = x0, .x1 = x1};
    Value out = push(n, x.size);
    auto xv = slot(x.node);
    auto yv = slot(out.node);
    for (int i = 0; i < x.size; ++i) {
        const Real v = xv[std::size_t(i)];
        Real y = 0;
        switch (op) {
            case Op::Sin: y = std::sin(v); break;
            case Op::Logistic: y = occufield::logistic(v); break;
            case Op::Log: y = std::log(v); break;
            case Op::Exp: y = std::exp(v); break;
            case Op::Sqrt: y = std::sqrt(v); break;
            case Op::Softplus: y = stable_softplus(v); break;
            case Op::LeakyRelu: y = v > 0 ? v : x0 * v; break;
            case Op::Clamp: y = occufield::clamp(v, x0, x1); break;
            case Op::Scale: y = x0 * v; break;
            case Op::Offset: y = v + x0; break;
            default: throw std::logic_error("unary: bad op");
        }
        yv[std::size_t(i)] = y;
    }
    return out;
}

Tape::Value Tape::sin(Value x) { return unary(Op::Sin, x); }
Tape::Value Tape::logistic(Value x) { return unary(Op::Logistic, x); }
Tape::Value Tape::log(Value x) { return unary(Op::Log, x); }
Tape::Value Tape::exp(Value x) { return unary(Op::Exp, x); }
Tape::Value Tape::sqrt(Value x) { return unary(Op::Sqrt, x); }
Tape::Value Tape::softplus(Value x) { return unary(Op::Softplus, x); }
Tape::Value Tape::leaky_relu(Value x, Real slope) { return unary(Op::LeakyRelu, x, slope); }
Tape::Value Tape::clamp(Value x, Real lo, Real hi) { return unary(Op::Clamp, x, lo, hi); }
Tape::Value Tape::scale(Value x, Real s) { return unary(Op::Scale, x, s); }
Tape::Value Tape::offset(Value x, Real c) { return unary(Op::Offset, x, c); }

Tape::Value Tape::binary(Op op, Value a, Value b) {
    if (a.size != b.size && a.size != 1 && b.size != 1)
        throw std::logic_error("binary op: incompatible sizes");
    const int size = std::max(a.size, b.size);
    Node n{.op = op, .a = a.node, .b = b.node};
    Value out = push(n, size);
    auto av = slot(a.node), bv = slot(b.node);
    auto yv = slot(out.node);
    for (int i = 0; i < size; ++i) {
        const Real x = av[a.size == 1 ? 0 : std::size_t(i)];
        const Real y = bv[b.size == 1 ? 0 : std::size_t(i)];
        Real r = 0;
        switch (op) {
            case Op::Add: r = x + y; break;
            case Op::Sub: r = x - y; break;
            case Op::Mul: r = x * y; break;
            case Op::Div: r = x / y; break;
            default: throw std::logic_error("binary: bad op");
        }
        yv[std::size_t(i)] = r;
    }
    return out;
}

Tape::Value Tape::add(Value a, Value b) { return binary(Op::Add, a, b); }
Tape::Value Tape::sub(Value a, Value b) { return binary(Op::Sub, a, b); }
Tape::Value Tape::mul(Value a, Value b) { return binary(Op::Mul, a, b); }
Tape::Value Tape::div(Value a, Value b) { return binary(Op::Div, a, b); }

Tape::Value Tape::dot(Value a, Value b) {
    if (a.size != b.size) throw std::logic_error("dot: size mismatch");
    Node n{.op = Op::Dot, .a = a.node, .b = b.node};
    Value out = push(n, 1);
    auto av = slot(a.node), bv = slot(b.node);
    Real acc = 0;
    for (int i = 0; i < a.size; ++i) acc += av[std::size_t(i)] * bv[std::size_t(i)];
    slot(out.node)[0] = acc;
    return out;
}

Tape::Value Tape::sum(Value x) {
    Node n{.op = Op::Sum, .a = x.node};
    Value out = push(n, 1);
    auto xv = slot(x.node);
    Real acc = 0;
    for (int i = 0; i < x.size; ++i) acc += xv[std::size_t(i)];
    slot(out.node)[0] = acc;
    return out;
}

Tape::Value Tape::concat(Value a, Value b) {
    Node n{.op = Op::Concat, .a = a.node, .b = b.node};
    Value out = push(n, a.size + b.size);
    auto av = slot(a.node), bv = slot(b.node);
    auto yv = slot(out.node);
    std::copy(av.begin(), av.end(), yv.begin());
    std::copy(bv.begin(), bv.end(), yv.begin() + a.size);
    return out;
}

Tape::Value Tape::slice(Value x, int offset, int n) {
    if (offset < 0 || n <= 0 || offset + n > x.size) throw std::logic_error("slice: out of range");
    Node nd{.op = Op::Slice, .a = x.node, .rows = offset};
    Value out = push(nd, n);
    auto xv = slot(x.node);
    auto yv = slot(out.node);
    std::copy(xv.begin() + offset, xv.begin() + offset + n, yv.begin());
    return out;
}

Real Tape::value_of(Value v) const {
    check_scalar(v, "value_of");
    return slot(v.node)[0];
}

std::span<const Real> Tape::values_of(Value v) const { return slot(v.node); }

void Tape::backward(Value output) {
    check_scalar(output, "backward");
    if (backward_done_)
        throw std::logic_error("backward already run on this tape; call clear() first");
    backward_done_ = true;

    grads_.assign(values_.size(), Real(0));
    grads_[nodes_[std::size_t(output.node)].off] = Real(1);

    for (int i = output.node; i >= 0; --i) {
        const Node& n = nodes_[std::size_t(i)];
        auto g = grad_slot(i);
        auto v = slot(i);
        for (int k = 0; k < n.size; ++k) {
            if (!std::isfinite(v[std::size_t(k)]))
                throw NumericError("non-finite primal at tape node " + std::to_string(i));
        }
        switch (n.op) {
            case Op::Const:
                break;
            case Op::Input:
                break;
            case Op::ParamVec: {
                for (int k = 0; k < n.size; ++k)
                    param_grad_[std::size_t(n.w_off + k)] += g[std::size_t(k)];
                break;
            }
            case Op::Affine: {
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                const Real* w = params_.data() + n.w_off;
                for (int r = 0; r < n.rows; ++r) {
                    const Real gr = g[std::size_t(r)];
                    if (gr == Real(0)) continue;
                    const Real* wr = w + std::size_t(r) * n.cols;
                    Real* pgw = param_grad_.data() + n.w_off + std::size_t(r) * n.cols;
                    for (int c = 0; c < n.cols; ++c) {
                        gx[std::size_t(c)] += gr * wr[c];
                        pgw[c] += gr * xv[std::size_t(c)];
                    }
                    if (n.b_off >= 0) param_grad_[std::size_t(n.b_off + r)] += gr;
                }
                break;
            }
            case Op::Film: {
                auto gx = grad_slot(n.a);
                auto gf = grad_slot(n.b);
                auto gp = grad_slot(n.c);
                auto xv = slot(n.a), fv = slot(n.b), pv = slot(n.c);
                for (int k = 0; k < n.size; ++k) {
                    const Real co = std::cos(fv[std::size_t(k)] * xv[std::size_t(k)] + pv[std::size_t(k)]);
                    const Real gy = g[std::size_t(k)] * co;
                    gx[std::size_t(k)] += gy * fv[std::size_t(k)];
                    gf[std::size_t(k)] += gy * xv[std::size_t(k)];
                    gp[std::size_t(k)] += gy;
                }
                break;
            }
            case Op::Sin: {
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] * std::cos(xv[std::size_t(k)]);
                break;
            }
            case Op::Logistic: {
                auto gx = grad_slot(n.a);
                for (int k = 0; k < n.size; ++k) {
                    const Real s = v[std::size_t(k)];
                    gx[std::size_t(k)] += g[std::size_t(k)] * s * (Real(1) - s);
                }
                break;
            }
            case Op::Log: {
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] / xv[std::size_t(k)];
                break;
            }
            case Op::Exp: {
                auto gx = grad_slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] * v[std::size_t(k)];
                break;
            }
            case Op::Sqrt: {
                auto gx = grad_slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] / (Real(2) * v[std::size_t(k)]);
                break;
            }
            case Op::Softplus: {
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] * occufield::logistic(xv[std::size_t(k)]);
                break;
            }
            case Op::LeakyRelu: {
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                for (int k = 0; k < n.size; ++k)
                    gx[std::size_t(k)] += g[std::size_t(k)] * (xv[std::size_t(k)] > 0 ? Real(1) : n.x0);
                break;
            }
            case Op::Clamp: {
                // Subgradient 0 at and beyond the bounds.
                auto gx = grad_slot(n.a);
                auto xv = slot(n.a);
                for (int k = 0; k < n.size; ++k) {
                    const Real x = xv[std::size_t(k)];
                    if (x > n.x0 && x < n.x1) gx[std::size_t(k)] += g[std::size_t(k)];
                }
                break;
            }
            case Op::Scale: {
                auto gx = grad_slot(n.a);
                for (int k = 0; k < n.size; ++k) gx[std::size_t(k)] += g[std::size_t(k)] * n.x0;
                break;
            }
            case Op::Offset: {
                auto gx = grad_slot(n.a);
                for (int k = 0; k < n.size; ++k) gx[std::size_t(k)] += g[std::size_t(k)];
                break;
            }
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                const Node& na = nodes_[std::size_t(n.a)];
                const Node& nb = nodes_[std::size_t(n.b)];
                auto ga = grad_slot(n.a);
                auto gb = grad_slot(n.b);
                auto av = slot(n.a), bv = slot(n.b);
                for (int k = 0; k < n.size; ++k) {
                    const std::size_t ia = na.size == 1 ? 0 : std::size_t(k);
                    const std::size_t ib = nb.size == 1 ? 0 : std::size_t(k);
                    const Real gk = g[std::size_t(k)];
                    switch (n.op) {
                        case Op::Add:
                            ga[ia] += gk;
                            gb[ib] += gk;
                            break;
                        case Op::Sub:
                            ga[ia] += gk;
                            gb[ib] -= gk;
                            break;
                        case Op::Mul:
                            ga[ia] += gk * bv[ib];
                            gb[ib] += gk * av[ia];
                            break;
                        case Op::Div:
                            ga[ia] += gk / bv[ib];
                            gb[ib] -= gk * av[ia] / (bv[ib] * bv[ib]);
                            break;
                        default: break;
                    }
                }
                break;
            }
            case Op::Dot: {
                const Real gk = g[0];
                auto ga = grad_slot(n.a);
                auto gb = grad_slot(n.b);
                auto av = slot(n.a), bv = slot(n.b);
                for (std::size_t k = 0; k < av.size(); ++k) {
                    ga[k] += gk * bv[k];
                    gb[k] += gk * av[k];
                }
                break;
            }
            case Op::Sum: {
                const Real gk = g[0];
                auto ga = grad_slot(n.a);
                for (auto& x : ga) x += gk;
                break;
            }
            case Op::Concat: {
                auto ga = grad_slot(n.a);
                auto gb = grad_slot(n.b);
                for (std::size_t k = 0; k < ga.size(); ++k) ga[k] += g[k];
                for (std::size_t k = 0; k < gb.size(); ++k) gb[k] += g[ga.size() + k];
                break;
            }
            case Op::Slice: {
                auto ga = grad_slot(n.a);
                for (std::size_t k = 0; k < g.size(); ++k) ga[std::size_t(n.rows) + k] += g[k];
                break;
            }
        }
    }
}

std::span<const Real> Tape::adjoint_of(Value leaf) const {
    if (!backward_done_) throw std::logic_error("adjoint_of: backward not run");
    const Node& n = nodes_[std::size_t(leaf.node)];
    return {grads_.data() + n.off, std::size_t(n.size)};
}

Vec3 Tape::input_gradient3(Value leaf) const {
    auto g = adjoint_of(leaf);
    if (g.size() != 3) throw std::logic_error("input_gradient3: leaf is not a 3-vector");
    return {g[0], g[1], g[2]};
}

void sgd_step(std::span<Real> params, std::span<const Real> grads, Real learning_rate) {
    if (params.size() != grads.size()) throw std::logic_error("sgd_step: size mismatch");
    if (!(learning_rate > 0)) throw std::logic_error("sgd_step: learning rate must be positive");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw NumericError("sgd_step: non-finite gradient at index " + std::to_string(i));
        params[i] -= learning_rate * grads[i];
    }
}

void SgdMomentum::step(std::span<Real> params, std::span<const Real> grads) {
    if (velocity_.empty()) velocity_.assign(params.size(), Real(0));
    if (params.size() != grads.size() || params.size() != velocity_.size())
        throw std::logic_error("SgdMomentum: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!std::isfinite(grads[i]))
            throw NumericError("SgdMomentum: non-finite gradient at index " + std::to_string(i));
        velocity_[i] = momentum_ * velocity_[i] + grads[i];
        params[i] -= lr_ * velocity_[i];
    }
}

}  // namespace occufield
