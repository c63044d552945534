#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rbrnet/errors.hpp"
#include "rbrnet/tensor.hpp"

namespace rbrnet {

/// Records the forward computation so it can be replayed in reverse. Nodes are
/// appended in execution order, which is a topological order by construction.
/// Each node's closure reads the gradient buffer of its output and accumulates
/// (+=) into the gradient buffers of its inputs, so a tensor feeding several
/// consumers collects contributions from each of them. A tape belongs to one
/// training step on one thread.
template <typename T>
class Tape {
  public:
    using StoragePtr = std::shared_ptr<typename Tensor<T>::Storage>;

    /// Mark `out` as produced on this tape and register its backward rule.
    /// The rule must only accumulate into grads of tracked inputs.
    void record(Tensor<T>& out, std::function<void()> backward_rule) {
        out.set_requires_grad(true);
        outputs_.insert(out.storage_id());
        nodes_.push_back(Node{out.storage(), std::move(backward_rule)});
    }

    bool produced(const Tensor<T>& t) const { return outputs_.count(t.storage_id()) != 0; }

    std::size_t size() const { return nodes_.size(); }

    /// Reverse sweep from a scalar loss. Seeds d(loss)/d(loss) = 1 and runs
    /// every recorded rule in reverse order. Grad buffers are not cleared
    /// here; callers zero them between steps.
    void backward(Tensor<T>& loss) {
        if (loss.numel() != 1) {
            throw GraphError("backward: loss must be a scalar, got shape " +
                             shape_str(loss.shape()));
        }
        if (!produced(loss)) {
            throw GraphError("backward: loss was not produced on this tape");
        }
        loss.grad()[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
            it->backward_rule();
        }
    }

  private:
    struct Node {
        StoragePtr out;
        std::function<void()> backward_rule;
    };

    std::vector<Node> nodes_;
    std::unordered_set<const void*> outputs_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

}  // namespace rbrnet
