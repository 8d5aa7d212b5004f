#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ftlab/tensor.hpp"

namespace ftlab {

enum class LossReduction {
    weighted_mean,  // sum(l_n) / sum(w_target_n)
    mean,           // sum(l_n) / batch
};

// Reverse-mode tape. Nodes are appended in execution order, so the node list
// is a topological order by construction; backward() walks it once in
// reverse. A tape is single-owner: build a graph, call backward, read grads.
class Tape {
public:
    using NodeId = int32_t;

    // Differentiable input (parameter). Gradient is readable after backward().
    NodeId leaf(Tensor value);
    // Non-differentiable input; backward never propagates into it.
    NodeId constant(Tensor value);

    const Tensor& value(NodeId id) const { return nodes_[check(id)].value; }
    std::span<const double> grad(NodeId id) const { return nodes_[check(id)].grad; }
    Tensor grad_tensor(NodeId id) const;
    size_t node_count() const { return nodes_.size(); }
    const std::vector<NodeId>& inputs_of(NodeId id) const { return nodes_[check(id)].inputs; }

    // elementwise
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId add_scalar(NodeId a, double s);
    NodeId scale(NodeId a, double s);
    NodeId tanh(NodeId a);
    NodeId gelu(NodeId a);

    // linear algebra
    NodeId matmul(NodeId a, NodeId b);     // [m x k] * [k x n]
    NodeId matmul_nt(NodeId a, NodeId b);  // [m x k] * [n x k]^T -> [m x n]
    NodeId affine(NodeId x, NodeId w, NodeId b);  // x*w + b, bias broadcast over rows

    // normalization / probabilities
    NodeId softmax(NodeId a, int axis);
    NodeId log_softmax(NodeId a, int axis);
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps);

    // out = x (*) scale + shift with constant tensors; gradient is dy (*) scale.
    // Serves dropout (scale = mask/keep, shift = 0) and mixout.
    NodeId mask_shift(NodeId x, Tensor scale, Tensor shift);

    // structural (rank-2)
    NodeId slice_cols(NodeId x, int start, int count);
    NodeId slice_rows(NodeId x, int start, int count);
    NodeId concat_cols(const std::vector<NodeId>& xs);
    NodeId concat_rows(const std::vector<NodeId>& xs);
    // out[i, :] = table[rows[i], :]; backward scatter-adds (duplicates accumulate).
    NodeId gather_rows(NodeId table, std::vector<int> rows);

    // reductions
    NodeId sum(NodeId a);
    NodeId mean(NodeId a);

    // Weighted cross entropy over logits [B x C]: per sample
    //   l_n = -w_{t_n} * log softmax(x_n)[t_n]
    // reduced to a scalar per `red`.
    NodeId weighted_cross_entropy(NodeId logits, std::vector<int> targets, std::vector<double> class_weights,
                                  LossReduction red = LossReduction::weighted_mean);

    // Escape hatch for composing new ops (and for test fixtures with
    // deliberately wrong backward rules). The callback receives the tape and
    // the node's own id and must accumulate into the inputs' grads.
    NodeId custom(std::vector<NodeId> inputs, Tensor value, std::function<void(Tape&, NodeId)> backward);

    // Seeds d(loss)/d(loss) = 1 and accumulates every node's gradient.
    // loss must be scalar. Leaves not on any path to loss keep zero grad.
    void backward(NodeId loss);

    // For backward rules: mutable gradient buffer of a node.
    std::span<double> grad_mut(NodeId id) { return nodes_[check(id)].grad; }

private:
    struct Node {
        Tensor value;
        std::vector<double> grad;  // zero until backward
        std::vector<NodeId> inputs;
        std::function<void(Tape&, NodeId)> backward;
    };

    NodeId push(Tensor value, std::vector<NodeId> inputs, std::function<void(Tape&, NodeId)> bw);
    NodeId check(NodeId id) const;

    std::vector<Node> nodes_;
};

}  // namespace ftlab
