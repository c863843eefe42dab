#include "pifnet/tensor.hpp"

#include <algorithm>
#include <unordered_set>

namespace pifnet {

Tensor Tensor::zeros(Shape shape) { return constant(std::move(shape), 0.0); }

Tensor Tensor::constant(Shape shape, Scalar value) {
    auto node = std::make_shared<Node>();
    node->value.assign(numel(shape), value);
    node->shape = std::move(shape);
    return Tensor(std::move(node));
}

Tensor Tensor::from(Shape shape, std::vector<Scalar> data) {
    if (numel(shape) != data.size()) {
        throw ShapeError("Tensor::from: shape " + shape_str(shape) + " expects " +
                         std::to_string(numel(shape)) + " values, got " + std::to_string(data.size()));
    }
    ensure_finite(data, "Tensor::from");
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(data);
    return Tensor(std::move(node));
}

Tensor Tensor::parameter(Shape shape, std::vector<Scalar> data) {
    Tensor t = from(std::move(shape), std::move(data));
    t.node_->requires_grad = true;
    return t;
}

Tensor Tensor::make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> parents,
                           std::function<void(Node&)> backprop, const char* op_name) {
    if (numel(shape) != value.size()) {
        throw ShapeError(std::string(op_name) + ": result size does not match shape");
    }
    ensure_finite(value, op_name);
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->value = std::move(value);
    node->is_leaf = false;
    for (const Tensor& p : parents) {
        if (!p.defined()) throw Error(std::string(op_name) + ": undefined input tensor");
        node->requires_grad = node->requires_grad || p.requires_grad();
        node->parents.push_back(p.node());
    }
    if (node->requires_grad) {
        node->backprop = std::move(backprop);
    } else {
        // Value-only node: no gradient will ever flow here.
        node->parents.clear();
    }
    return Tensor(std::move(node));
}

const Shape& Tensor::shape() const {
    if (!node_) throw Error("Tensor: undefined");
    return node_->shape;
}

std::size_t Tensor::size() const { return node_ ? node_->value.size() : 0; }

const std::vector<Scalar>& Tensor::data() const {
    if (!node_) throw Error("Tensor: undefined");
    return node_->value;
}

std::vector<Scalar>& Tensor::data_mut() {
    if (!node_) throw Error("Tensor: undefined");
    if (!node_->is_leaf) throw Error("Tensor: in-place mutation is restricted to leaves");
    return node_->value;
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node_ && node_->is_leaf; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<Scalar>& Tensor::grad() const {
    if (!has_grad()) throw Error("Tensor::grad: no gradient populated");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (node_) node_->grad.clear();
}

Scalar Tensor::item() const {
    if (size() != 1) throw ShapeError("Tensor::item: tensor is not scalar");
    return node_->value[0];
}

Tensor Tensor::detached() const {
    if (!node_) return Tensor();
    return Tensor::from(node_->shape, node_->value);
}

namespace {

Scalar apply_ew(EwOp op, Scalar x, Scalar y) {
    switch (op) {
        case EwOp::Add: return x + y;
        case EwOp::Sub: return x - y;
        case EwOp::Mul: return x * y;
        case EwOp::Div: return x / y;
    }
    throw Error("elementwise: unknown op");
}

const char* ew_name(EwOp op) {
    switch (op) {
        case EwOp::Add: return "add";
        case EwOp::Sub: return "sub";
        case EwOp::Mul: return "mul";
        case EwOp::Div: return "div";
    }
    return "?";
}

}  // namespace

Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b) {
    if (!same_shape(a.shape(), b.shape())) {
        throw ShapeError(std::string("elementwise ") + ew_name(op) + ": shape mismatch " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
    const auto& av = a.data();
    const auto& bv = b.data();
    std::vector<Scalar> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_ew(op, av[i], bv[i]);

    auto an = a.node();
    auto bn = b.node();
    auto backprop = [op, an, bn](Tensor::Node& self) {
        const auto& g = self.grad;
        if (an->requires_grad) {
            auto& ga = an->grad_buffer();
            switch (op) {
                case EwOp::Add:
                case EwOp::Sub:
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                    break;
                case EwOp::Mul:
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bn->value[i];
                    break;
                case EwOp::Div:
                    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / bn->value[i];
                    break;
            }
        }
        if (bn->requires_grad) {
            auto& gb = bn->grad_buffer();
            switch (op) {
                case EwOp::Add:
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
                    break;
                case EwOp::Sub:
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                    break;
                case EwOp::Mul:
                    for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * an->value[i];
                    break;
                case EwOp::Div:
                    for (std::size_t i = 0; i < g.size(); ++i)
                        gb[i] -= g[i] * an->value[i] / (bn->value[i] * bn->value[i]);
                    break;
            }
        }
    };
    return Tensor::make_result(a.shape(), std::move(out), {a, b}, std::move(backprop), ew_name(op));
}

Tensor elementwise(EwOp op, const Tensor& a, Scalar b) {
    const auto& av = a.data();
    std::vector<Scalar> out(av.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = apply_ew(op, av[i], b);

    auto an = a.node();
    auto backprop = [op, an, b](Tensor::Node& self) {
        if (!an->requires_grad) return;
        const auto& g = self.grad;
        auto& ga = an->grad_buffer();
        switch (op) {
            case EwOp::Add:
            case EwOp::Sub:
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                break;
            case EwOp::Mul:
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b;
                break;
            case EwOp::Div:
                for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] / b;
                break;
        }
    };
    return Tensor::make_result(a.shape(), std::move(out), {a}, std::move(backprop), ew_name(op));
}

Tensor add(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return elementwise(EwOp::Mul, a, b); }
Tensor mul(const Tensor& a, Scalar b) { return elementwise(EwOp::Mul, a, b); }

Tensor sum(const Tensor& a) {
    Scalar s = 0.0;
    for (Scalar x : a.data()) s += x;
    auto an = a.node();
    auto backprop = [an](Tensor::Node& self) {
        if (!an->requires_grad) return;
        Scalar g = self.grad[0];
        auto& ga = an->grad_buffer();
        for (auto& x : ga) x += g;
    };
    return Tensor::make_result(Shape{1}, {s}, {a}, std::move(backprop), "sum");
}

Tensor mean(const Tensor& a) {
    const Scalar n = static_cast<Scalar>(a.size());
    Scalar s = 0.0;
    for (Scalar x : a.data()) s += x;
    auto an = a.node();
    auto backprop = [an, n](Tensor::Node& self) {
        if (!an->requires_grad) return;
        Scalar g = self.grad[0] / n;
        auto& ga = an->grad_buffer();
        for (auto& x : ga) x += g;
    };
    return Tensor::make_result(Shape{1}, {s / n}, {a}, std::move(backprop), "mean");
}

void backward(const Tensor& loss) {
    if (!loss.defined()) throw Error("backward: undefined loss");
    if (loss.size() != 1) throw ShapeError("backward: loss must be a scalar");
    if (!loss.requires_grad()) throw Error("backward: loss does not depend on any parameter");

    using Node = Tensor::Node;
    // Iterative post-order DFS; the post-order list ends with the loss node.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(loss.node().get(), 0);
    visited.insert(loss.node().get());
    while (!stack.empty()) {
        Node* node = stack.back().first;
        std::size_t idx = stack.back().second;
        if (idx < node->parents.size()) {
            ++stack.back().second;
            Node* parent = node->parents[idx].get();
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    for (Node* n : order) {
        if (!n->is_leaf && n->consumed) {
            throw Error("backward: graph already consumed by a previous backward pass");
        }
    }

    loss.node()->grad_buffer()[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backprop && !n->grad.empty()) {
            n->backprop(*n);
        }
        if (!n->is_leaf) {
            n->consumed = true;
            n->backprop = nullptr;  // release captured buffers
        }
    }

    // Surface any non-finite gradient immediately.
    for (Node* n : order) {
        if (n->is_leaf && !n->grad.empty()) ensure_finite(n->grad, "backward");
    }
}

}  // namespace pifnet
