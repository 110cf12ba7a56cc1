#pragma once

#include "facecorr/tensor.hpp"

#include <cstdint>
#include <vector>

namespace facecorr {

/// Reverse-mode tape over dense 2-D tensors. Nodes are created in forward
/// (topological) order; backward walks them in reverse. The op set is exactly
/// what the point-set encoder / shape decoders need, plus a scalar sum for
/// tape-only objectives.
class Tape {
public:
    /// Leaf holding a copy of the given value. Gradients are retrievable via
    /// grad() after backward.
    int input(Tensor value);

    /// Leaf aliasing external storage (network parameters). If grad is
    /// non-null, backward accumulates into it (additively, so several
    /// backward passes compose).
    int leaf(const Tensor* value, Tensor* grad = nullptr);

    int matmul(int a, int b);
    int add_rowvec(int x, int bias);  // broadcast a 1 x m row over n rows
    int add(int a, int b);
    int relu(int x);
    int max_rows(int x);  // column-wise max over rows; ties to the lowest row
    int reshape(int x, int rows, int cols);
    int sum(int x);  // 1 x 1

    ConstRowMap value(int id) const;
    const Tensor& value_tensor(int id) const;

    /// Seed dL/d(output) and propagate. Multiple calls accumulate.
    void backward(int output, const Tensor& seed);
    /// Scalar convenience: seeds 1 on a 1 x 1 output.
    void backward_scalar(int output);

    /// Gradient buffer of an interior/input node (valid after backward).
    const Tensor& grad(int id) const;

    /// Hash of every data-dependent routing choice (ReLU activation sets,
    /// max-pool argmax rows) made during the forward pass.
    uint64_t routing_hash() const;

    int node_count() const { return static_cast<int>(nodes_.size()); }
    void clear();

private:
    enum class Op { Input, Leaf, MatMul, AddRowVec, Add, Relu, MaxRows, Reshape, Sum };

    struct Node {
        Op op;
        int a = -1, b = -1;
        Tensor value;                      // owned value (empty for Leaf)
        const Tensor* ext_value = nullptr; // Leaf only
        Tensor* ext_grad = nullptr;        // Leaf only
        Tensor grad;
        std::vector<int> argmax;           // MaxRows only
    };

    ConstRowMap node_value(const Node& n) const;
    const Tensor& node_value_tensor(const Node& n) const;
    int push(Node node);
    void check_id(int id, const char* what) const;

    std::vector<Node> nodes_;
};

}  // namespace facecorr
