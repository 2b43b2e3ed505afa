#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <string_view>
#include <vector>

#include "pmn/autodiff/tensor.hpp"

namespace pmn::ad {

/// Wengert list for one forward pass.
///
/// Intermediate tensors live in the tape (stable addresses for its lifetime);
/// leaves such as parameters live outside it and receive gradients by
/// accumulation. Nodes are recorded only when gradients are enabled and some
/// input requires them.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void(Tensor<T>& output)>;

    struct Node {
        std::string_view op;
        Tensor<T>* output;
        std::vector<const Tensor<T>*> inputs;
        BackwardFn backward;
    };

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    void set_grad_enabled(bool enabled) { grad_enabled_ = enabled; }
    bool grad_enabled() const { return grad_enabled_; }

    /// True when an op over `inputs` needs to record a backward rule.
    bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) const {
        if (!grad_enabled_) return false;
        for (const Tensor<T>* in : inputs) {
            if (in->requires_grad()) return true;
        }
        return false;
    }

    /// Stores `value`; records a node when needs_grad(inputs).
    Tensor<T>& emit(std::string_view op, Tensor<T> value,
                    std::initializer_list<const Tensor<T>*> inputs, BackwardFn backward) {
        const bool track = needs_grad(inputs);
        value.set_requires_grad(track);
        Tensor<T>& stored = storage_.emplace_back(std::move(value));
        if (track) nodes_.push_back(Node{op, &stored, std::vector<const Tensor<T>*>(inputs),
                                         std::move(backward)});
        return stored;
    }

    Tensor<T>& constant(Tensor<T> value) {
        value.set_requires_grad(false);
        return storage_.emplace_back(std::move(value));
    }

    /// Mixes a discrete forward decision (relu masks, argmax positions,
    /// clamps) into a signature; two passes with equal signatures took the
    /// same branch at every non-differentiable point.
    void note_branch(std::uint64_t decision) {
        signature_ ^= decision + 0x9e3779b97f4a7c15ULL + (signature_ << 6) + (signature_ >> 2);
    }
    std::uint64_t branch_signature() const { return signature_; }

    /// Accumulates d(loss)/d(leaf) into every gradient-tracking leaf.
    /// Intermediate gradients are reset first, so calling this twice adds
    /// exactly twice the gradient to the leaves.
    void backward(const Tensor<T>& loss) {
        if (loss.size() != 1) {
            throw ContractError("backward() needs a scalar loss, got shape " +
                                shape_string(loss.shape()));
        }
        if (!loss.requires_grad()) return;
        Tensor<T>* root = nullptr;
        for (Node& node : nodes_) {
            node.output->zero_grad();
            if (node.output == &loss) root = node.output;
        }
        if (!root) throw ContractError("backward() loss was not produced on this tape");
        root->grad()[0] = T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) it->backward(*it->output);
    }

    const std::vector<Node>& nodes() const { return nodes_; }

    /// Every node input is either a leaf or the output of an earlier node.
    bool topologically_ordered() const {
        for (std::size_t i = 0; i < nodes_.size(); ++i) {
            for (const Tensor<T>* in : nodes_[i].inputs) {
                if (!in->requires_grad()) continue;
                bool produced_later = false;
                for (std::size_t j = i; j < nodes_.size(); ++j) {
                    if (nodes_[j].output == in) produced_later = true;
                }
                if (produced_later) return false;
            }
        }
        return true;
    }

    void clear() {
        nodes_.clear();
        storage_.clear();
        signature_ = 0;
    }

private:
    std::deque<Tensor<T>> storage_;
    std::vector<Node> nodes_;
    std::uint64_t signature_ = 0;
    bool grad_enabled_ = true;
};

}  // namespace pmn::ad
