// Copyright Contributors to the OccuField Project
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "occufield/core.hpp"

namespace occufield {

// Reverse-mode tape over vector-valued nodes. Dense layers are fused into
// single affine/FiLM nodes so the tape stays O(layers), not O(weights).
// Parameters live in a flat registry owned by the caller; the tape only
// borrows it and owns the matching gradient accumulator.
class Tape {
public:
    // Handle to a node. size == 1 marks a scalar.
    struct Value {
        int node = -1;
        int size = 0;
        bool valid() const { return node >= 0; }
    };

    Tape() = default;
    explicit Tape(std::span<const Real> params);

    // Drops all nodes and zeroes gradients; node/value storage is reused.
    void clear();

    // Leaves.
    Value constant(Real v);
    Value constant(std::span<const Real> v);
    Value constant3(const Vec3& v);
    Value input(std::span<const Real> v);  // differentiable leaf; adjoint readable after backward
    Value input3(const Vec3& v);
    Value param_vector(int offset, int n);

    // Fused layers. W is row-major at params[w_offset], shape rows x x.size.
    // b_offset < 0 means no bias.
    Value affine(Value x, int w_offset, int b_offset, int rows);
    // y = sin(freq ⊙ x + phase); all three the same length.
    Value film(Value x, Value freq, Value phase);

    // Elementwise unary.
    Value sin(Value x);
    Value logistic(Value x);
    Value log(Value x);
    Value exp(Value x);
    Value sqrt(Value x);
    Value softplus(Value x);
    Value leaky_relu(Value x, Real slope);
    Value clamp(Value x, Real lo, Real hi);
    Value scale(Value x, Real s);
    Value offset(Value x, Real c);
    Value neg(Value x) { return scale(x, Real(-1)); }

    // Elementwise binary; one side may be a scalar (broadcast).
    Value add(Value a, Value b);
    Value sub(Value a, Value b);
    Value mul(Value a, Value b);
    Value div(Value a, Value b);

    // Reductions / shuffles.
    Value dot(Value a, Value b);
    Value sum(Value x);
    Value concat(Value a, Value b);
    Value slice(Value x, int offset, int n);

    Real value_of(Value v) const;
    std::span<const Real> values_of(Value v) const;

    // Reverse sweep from a scalar output. A second call without clear() is
    // rejected; non-finite primals abort with the offending node index.
    void backward(Value output);
    bool backward_done() const { return backward_done_; }

    std::span<const Real> param_gradients() const { return param_grad_; }
    std::span<const Real> adjoint_of(Value leaf) const;
    Vec3 input_gradient3(Value leaf) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    enum class Op : std::uint8_t {
        Const, Input, ParamVec, Affine, Film,
        Sin, Logistic, Log, Exp, Sqrt, Softplus, LeakyRelu, Clamp, Scale, Offset,
        Add, Sub, Mul, Div, Dot, Sum, Concat, Slice,
    };

    struct Node {
        Op op;
        int a = -1, b = -1, c = -1;
        int off = 0, size = 0;
        int w_off = -1, b_off = -1;
        int rows = 0, cols = 0;
        Real x0 = 0, x1 = 0;
    };

    Value push(Node n, int size);
    std::span<Real> slot(int node);
    std::span<const Real> slot(int node) const;
    std::span<Real> grad_slot(int node);
    Value unary(Op op, Value x, Real x0 = 0, Real x1 = 0);
    Value binary(Op op, Value a, Value b);
    static void check_scalar(Value v, const char* what);

    std::span<const Real> params_;
    std::vector<Real> param_grad_;
    std::vector<Node> nodes_;
    std::vector<Real> values_;
    std::vector<Real> grads_;
    bool backward_done_ = false;
};

// params <- params - lr * grads, elementwise. Throws NumericError on a
// non-finite gradient.
void sgd_step(std::span<Real> params, std::span<const Real> grads, Real learning_rate);

// Heavy-ball variant used by the fitting loop.
class SgdMomentum {
public:
    SgdMomentum(Real learning_rate, Real momentum) : lr_(learning_rate), momentum_(momentum) {}
    void step(std::span<Real> params, std::span<const Real> grads);

private:
    Real lr_;
    Real momentum_;
    std::vector<Real> velocity_;
};

}  // namespace occufield
