#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "pifnet/common.hpp"

namespace pifnet {

// Dense double tensor with reverse-mode autodiff. Activations use the axis
// order (batch, channels, depth, height, width); kernels use
// (out_channels, in_channels, kd, kh, kw). Storage is row-major.
//
// Values are immutable once produced by an operation; the only mutation
// points are gradient accumulation during backward() and in-place parameter
// updates on leaves (optimizer).
class Tensor {
public:
    struct Node {
        Shape shape;
        std::vector<Scalar> value;
        std::vector<Scalar> grad;  // empty until touched by backward
        bool requires_grad = false;
        bool is_leaf = true;
        bool consumed = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;

        std::vector<Scalar>& grad_buffer() {
            if (grad.empty()) grad.assign(value.size(), 0.0);
            return grad;
        }
    };

    Tensor() = default;

    static Tensor zeros(Shape shape);
    static Tensor constant(Shape shape, Scalar value);
    static Tensor from(Shape shape, std::vector<Scalar> data);
    // Leaf that participates in gradient computation.
    static Tensor parameter(Shape shape, std::vector<Scalar> data);

    // Builds a non-leaf result node. `backprop` reads the node's grad and
    // accumulates into the parents' grad buffers.
    static Tensor make_result(Shape shape, std::vector<Scalar> value, std::vector<Tensor> parents,
                              std::function<void(Node&)> backprop, const char* op_name);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    const std::vector<Scalar>& data() const;
    // In-place update hook for optimizers; leaves only.
    std::vector<Scalar>& data_mut();

    bool requires_grad() const;
    bool is_leaf() const;
    bool has_grad() const;
    const std::vector<Scalar>& grad() const;
    void zero_grad();

    Scalar item() const;

    // Value copy detached from any graph.
    Tensor detached() const;

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
    std::shared_ptr<Node> node_;
};

enum class EwOp { Add, Sub, Mul, Div };

// Elementwise on equal shapes; gradient rule registered per op tag.
Tensor elementwise(EwOp op, const Tensor& a, const Tensor& b);
// Scalar broadcast variant.
Tensor elementwise(EwOp op, const Tensor& a, Scalar b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, Scalar b);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Reverse-mode pass from a scalar loss. Populates grad on every reachable
// tensor with requires_grad, then marks the interior of the graph consumed;
// a second backward through the same nodes is an error.
void backward(const Tensor& loss);

}  // namespace pifnet
