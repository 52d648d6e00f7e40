#ifndef PFALAB_TENSOR_HPP
#define PFALAB_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace pfalab {

struct DimensionError : std::runtime_error {
    explicit DimensionError(const std::string& m) : std::runtime_error(m) {}
};
struct DegenerateVectorError : std::runtime_error {
    explicit DegenerateVectorError(const std::string& m) : std::runtime_error(m) {}
};

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& s) {
    std::size_t n = 1;
    for (auto e : s) n *= e;
    return n;
}

namespace detail {

struct Node {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // allocated on demand, only when requires_grad
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;  // scatters node.grad into parents
    const char* op = "leaf";

    std::size_t size() const { return value.size(); }

    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Handle to a node in a reverse-mode computation graph. Copies share the node.
class Tensor {
public:
    Tensor() = default;

    static Tensor leaf(Shape shape, std::vector<double> values, bool requires_grad) {
        if (shape_size(shape) != values.size())
            throw DimensionError("tensor: shape/value size mismatch");
        auto n = std::make_shared<detail::Node>();
        n->shape = std::move(shape);
        n->value = std::move(values);
        n->requires_grad = requires_grad;
        return Tensor(std::move(n));
    }

    static Tensor param(Shape shape, std::vector<double> values) {
        return leaf(std::move(shape), std::move(values), true);
    }
    static Tensor constant(Shape shape, std::vector<double> values) {
        return leaf(std::move(shape), std::move(values), false);
    }
    static Tensor scalar(double v) { return constant({1}, {v}); }

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const { return node_->shape; }
    std::size_t size() const { return node_->value.size(); }
    const std::vector<double>& values() const { return node_->value; }
    std::vector<double>& mutable_values() { return node_->value; }
    const std::vector<double>& grad() const { return node_->grad; }
    bool requires_grad() const { return node_->requires_grad; }
    bool grad_allocated() const { return !node_->grad.empty(); }
    const char* op() const { return node_->op; }

    double item() const {
        if (node_->value.size() != 1) throw DimensionError("item: tensor is not a scalar");
        return node_->value[0];
    }

    // Same values, no history, no gradient.
    Tensor detach() const { return constant(node_->shape, node_->value); }

    void zero_grad() {
        if (node_->requires_grad) node_->grad.assign(node_->value.size(), 0.0);
    }

    // Reverse pass from a scalar root. Each node is visited exactly once,
    // in reverse topological order; gradients accumulate by summation.
    void backward() const {
        if (node_->value.size() != 1) throw DimensionError("backward: root must be scalar");
        std::vector<detail::Node*> order;
        std::unordered_set<detail::Node*> seen;
        topo(node_.get(), seen, order);
        node_->ensure_grad();
        node_->grad[0] += 1.0;
        for (auto it = order.rbegin(); it != order.rend(); ++it) {
            detail::Node* n = *it;
            if (n->backward) n->backward(*n);
        }
    }

    detail::Node* node() const { return node_.get(); }
    std::shared_ptr<detail::Node> share() const { return node_; }

    static Tensor wrap(std::shared_ptr<detail::Node> n) { return Tensor(std::move(n)); }

private:
    explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}

    static void topo(detail::Node* n, std::unordered_set<detail::Node*>& seen,
                     std::vector<detail::Node*>& order) {
        if (!n->requires_grad || seen.count(n)) return;
        // iterative DFS, post-order
        struct Frame { detail::Node* node; std::size_t next; };
        std::vector<Frame> stack{{n, 0}};
        seen.insert(n);
        while (!stack.empty()) {
            Frame& f = stack.back();
            if (f.next < f.node->parents.size()) {
                detail::Node* p = f.node->parents[f.next++].get();
                if (p->requires_grad && !seen.count(p)) {
                    seen.insert(p);
                    stack.push_back({p, 0});
                }
            } else {
                order.push_back(f.node);
                stack.pop_back();
            }
        }
    }

    std::shared_ptr<detail::Node> node_;
};

namespace detail {

inline std::shared_ptr<Node> make_result(Shape shape, const std::vector<Tensor>& parents,
                                         const char* op) {
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->value.resize(shape_size(n->shape));
    n->op = op;
    for (const auto& p : parents) {
        if (p.node()->requires_grad) n->requires_grad = true;
    }
    if (n->requires_grad) {
        for (const auto& p : parents) n->parents.push_back(p.share());
    }
    return n;
}

}  // namespace detail

}  // namespace pfalab

#endif
