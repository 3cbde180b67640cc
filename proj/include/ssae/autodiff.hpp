#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ssae/errors.hpp"
#include "ssae/image.hpp"

namespace ssae::ad {

using Shape = std::vector<int>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense value buffer with an optional gradient of the same extent.
// Parameters of a model are Tensors; everything inside a Graph is a node.
struct Tensor {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;

    Tensor() = default;
    Tensor(Shape s, std::vector<double> v);
    static Tensor zeros(Shape s);

    std::size_t numel() const { return values.size(); }
    void ensure_grad();
    void zero_grad();
};

enum class Padding {
    kSameReflect,  // mirror-about-edge-pixel padding, output spatial dims = ceil(in/stride)
    kValid,
};

// Reverse-mode tape over dense tensors. Nodes are appended in topological
// order; backward() walks them exactly once in reverse.
class Graph {
public:
    // Leaf with no gradient path (inputs, targets, frozen contributions).
    int constant(Shape shape, std::vector<double> values);
    int constant(const Image& img);  // shape [1, 1, H, W]

    // Differentiable leaf; values are copied in, gradient read back via grad().
    int param(const Tensor& t);

    int add(int a, int b);
    int sub(int a, int b);
    int mul(int a, int b);
    int scale(int a, double c);
    int matmul(int a, int b);          // [m,k] x [k,n] -> [m,n]
    int bias_add(int x, int b);        // b matches x.shape[1], broadcast elsewhere
    int conv2d(int x, int w, int stride, Padding padding);  // x [N,Ci,H,W], w [Co,Ci,kh,kw]
    int nearest_up2(int x);            // [N,C,H,W] -> [N,C,2H,2W]
    int leaky_relu(int x, double slope);
    int sigmoid(int x);
    int exp(int x);
    int reshape(int x, Shape shape);
    int mean(int x);                   // -> scalar [1]
    int sum(int x);                    // -> scalar [1]
    int mse(int pred, int target);     // mean of squared differences -> [1]
    int gaussian_kl(int mu, int logvar);  // -0.5 * mean(1 + lv - mu^2 - e^lv) -> [1]

    // Populates gradients of every differentiable node reachable from `loss`.
    // `loss` must be scalar; one backward pass per graph.
    void backward(int loss);

    const Shape& shape(int id) const { return nodes_[id].shape; }
    std::span<const double> value(int id) const { return nodes_[id].value; }
    std::span<const double> grad(int id) const;
    double scalar(int id) const;
    Image value_as_image(int id) const;  // node must be [1,1,H,W] or [H,W]

    int node_count() const { return static_cast<int>(nodes_.size()); }

private:
    struct Node {
        Shape shape;
        std::vector<double> value;
        std::vector<double> grad;
        bool needs_grad = false;
        std::function<void(Graph&)> backprop;  // accumulates into parents
    };

    int push(Node n);
    Node& node(int id) { return nodes_[id]; }
    void check_id(int id) const;

    std::vector<Node> nodes_;
    bool backward_done_ = false;
};

Tensor tensor_from_image(const Image& img);   // [1, 1, H, W]
Image image_from_tensor(const Tensor& t);

}  // namespace ssae::ad
