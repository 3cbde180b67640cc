#include "ssae/autodiff.hpp"

#include <cmath>

#include "ssae/pyramid.hpp"  // mirror_index

namespace ssae::ad {

using pyramid::mirror_index;

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) {
        if (d < 1) throw ShapeError("shape extent must be >= 1");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

std::string shape_str(const Shape& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

Tensor::Tensor(Shape s, std::vector<double> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != shape_numel(shape)) {
        throw ShapeError("Tensor: value count " + std::to_string(values.size()) +
                         " != numel of " + shape_str(shape));
    }
}

Tensor Tensor::zeros(Shape s) {
    const std::size_t n = shape_numel(s);
    return Tensor(std::move(s), std::vector<double>(n, 0.0));
}

void Tensor::ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
}

void Tensor::zero_grad() {
    grad.assign(values.size(), 0.0);
}

Tensor tensor_from_image(const Image& img) {
    return Tensor({1, 1, img.height(), img.width()}, img.data());
}

Image image_from_tensor(const Tensor& t) {
    if (t.shape.size() == 4 && t.shape[0] == 1 && t.shape[1] == 1) {
        return Image(t.shape[3], t.shape[2], t.values);
    }
    if (t.shape.size() == 2) {
        return Image(t.shape[1], t.shape[0], t.values);
    }
    throw ShapeError("image_from_tensor: shape " + shape_str(t.shape) + " is not an image");
}

int Graph::push(Node n) {
    if (backward_done_) {
        throw ContractError("Graph: cannot extend a graph after backward()");
    }
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
}

void Graph::check_id(int id) const {
    if (id < 0 || id >= static_cast<int>(nodes_.size())) {
        throw ContractError("Graph: invalid node id " + std::to_string(id));
    }
}

int Graph::constant(Shape shape, std::vector<double> values) {
    if (values.size() != shape_numel(shape)) {
        throw ShapeError("constant: value count != numel of " + shape_str(shape));
    }
    Node n;
    n.shape = std::move(shape);
    n.value = std::move(values);
    return push(std::move(n));
}

int Graph::constant(const Image& img) {
    return constant({1, 1, img.height(), img.width()}, img.data());
}

int Graph::param(const Tensor& t) {
    Node n;
    n.shape = t.shape;
    n.value = t.values;
    n.needs_grad = true;
    return push(std::move(n));
}

namespace {

void require_same_shape(const Shape& a, const Shape& b, const char* op) {
    if (a != b) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

}  // namespace

int Graph::add(int a, int b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].shape, nodes_[b].shape, "add");
    Node n;
    n.shape = nodes_[a].shape;
    n.value.resize(nodes_[a].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = nodes_[a].value[i] + nodes_[b].value[i];
    }
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [a, b, out](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        if (g.nodes_[a].needs_grad) {
            auto& ga = g.nodes_[a].grad;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.nodes_[b].needs_grad) {
            auto& gb = g.nodes_[b].grad;
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
        }
    };
    return out;
}

int Graph::sub(int a, int b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].shape, nodes_[b].shape, "sub");
    Node n;
    n.shape = nodes_[a].shape;
    n.value.resize(nodes_[a].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = nodes_[a].value[i] - nodes_[b].value[i];
    }
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [a, b, out](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        if (g.nodes_[a].needs_grad) {
            auto& ga = g.nodes_[a].grad;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.nodes_[b].needs_grad) {
            auto& gb = g.nodes_[b].grad;
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
        }
    };
    return out;
}

int Graph::mul(int a, int b) {
    check_id(a);
    check_id(b);
    require_same_shape(nodes_[a].shape, nodes_[b].shape, "mul");
    Node n;
    n.shape = nodes_[a].shape;
    n.value.resize(nodes_[a].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = nodes_[a].value[i] * nodes_[b].value[i];
    }
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [a, b, out](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        if (g.nodes_[a].needs_grad) {
            auto& ga = g.nodes_[a].grad;
            const auto& vb = g.nodes_[b].value;
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * vb[i];
        }
        if (g.nodes_[b].needs_grad) {
            auto& gb = g.nodes_[b].grad;
            const auto& va = g.nodes_[a].value;
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * va[i];
        }
    };
    return out;
}

int Graph::scale(int a, double c) {
    check_id(a);
    Node n;
    n.shape = nodes_[a].shape;
    n.value.resize(nodes_[a].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = c * nodes_[a].value[i];
    n.needs_grad = nodes_[a].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [a, c, out](Graph& g) {
        if (!g.nodes_[a].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        auto& ga = g.nodes_[a].grad;
        for (std::size_t i = 0; i < go.size(); ++i) ga[i] += c * go[i];
    };
    return out;
}

int Graph::matmul(int a, int b) {
    check_id(a);
    check_id(b);
    const Shape& sa = nodes_[a].shape;
    const Shape& sb = nodes_[b].shape;
    if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(sa) + " x " + shape_str(sb));
    }
    const int m = sa[0], k = sa[1], nn = sb[1];
    Node n;
    n.shape = {m, nn};
    n.value.assign(static_cast<std::size_t>(m) * nn, 0.0);
    {
        const auto& va = nodes_[a].value;
        const auto& vb = nodes_[b].value;
        for (int i = 0; i < m; ++i) {
            for (int kk = 0; kk < k; ++kk) {
                const double av = va[static_cast<std::size_t>(i) * k + kk];
                const double* brow = &vb[static_cast<std::size_t>(kk) * nn];
                double* orow = &n.value[static_cast<std::size_t>(i) * nn];
                for (int j = 0; j < nn; ++j) orow[j] += av * brow[j];
            }
        }
    }
    n.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [a, b, out, m, k, nn](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        if (g.nodes_[a].needs_grad) {
            auto& ga = g.nodes_[a].grad;
            const auto& vb = g.nodes_[b].value;
            for (int i = 0; i < m; ++i) {
                for (int kk = 0; kk < k; ++kk) {
                    const double* brow = &vb[static_cast<std::size_t>(kk) * nn];
                    const double* grow = &go[static_cast<std::size_t>(i) * nn];
                    double acc = 0.0;
                    for (int j = 0; j < nn; ++j) acc += grow[j] * brow[j];
                    ga[static_cast<std::size_t>(i) * k + kk] += acc;
                }
            }
        }
        if (g.nodes_[b].needs_grad) {
            auto& gb = g.nodes_[b].grad;
            const auto& va = g.nodes_[a].value;
            for (int i = 0; i < m; ++i) {
                const double* grow = &go[static_cast<std::size_t>(i) * nn];
                for (int kk = 0; kk < k; ++kk) {
                    const double av = va[static_cast<std::size_t>(i) * k + kk];
                    double* brow = &gb[static_cast<std::size_t>(kk) * nn];
                    for (int j = 0; j < nn; ++j) brow[j] += av * grow[j];
                }
            }
        }
    };
    return out;
}

int Graph::bias_add(int x, int b) {
    check_id(x);
    check_id(b);
    const Shape& sx = nodes_[x].shape;
    const Shape& sb = nodes_[b].shape;
    if (sx.size() < 2 || sb.size() != 1 || sb[0] != sx[1]) {
        throw ShapeError("bias_add: bias " + shape_str(sb) + " does not match dim 1 of " +
                         shape_str(sx));
    }
    const int batch = sx[0];
    const int channels = sx[1];
    std::size_t inner = 1;
    for (std::size_t i = 2; i < sx.size(); ++i) inner *= static_cast<std::size_t>(sx[i]);
    Node n;
    n.shape = sx;
    n.value.resize(nodes_[x].value.size());
    {
        const auto& vx = nodes_[x].value;
        const auto& vb = nodes_[b].value;
        std::size_t idx = 0;
        for (int nb = 0; nb < batch; ++nb) {
            for (int c = 0; c < channels; ++c) {
                const double bias = vb[c];
                for (std::size_t i = 0; i < inner; ++i, ++idx) n.value[idx] = vx[idx] + bias;
            }
        }
    }
    n.needs_grad = nodes_[x].needs_grad || nodes_[b].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, b, out, batch, channels, inner](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        if (g.nodes_[x].needs_grad) {
            auto& gx = g.nodes_[x].grad;
            for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
        }
        if (g.nodes_[b].needs_grad) {
            auto& gb = g.nodes_[b].grad;
            std::size_t idx = 0;
            for (int nb = 0; nb < batch; ++nb) {
                for (int c = 0; c < channels; ++c) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < inner; ++i, ++idx) acc += go[idx];
                    gb[c] += acc;
                }
            }
        }
    };
    return out;
}

int Graph::conv2d(int x, int w, int stride, Padding padding) {
    check_id(x);
    check_id(w);
    const Shape& sx = nodes_[x].shape;
    const Shape& sw = nodes_[w].shape;
    if (sx.size() != 4 || sw.size() != 4 || sx[1] != sw[1]) {
        throw ShapeError("conv2d: expected x [N,Ci,H,W] and w [Co,Ci,kh,kw], got " +
                         shape_str(sx) + " and " + shape_str(sw));
    }
    if (stride < 1) throw ConfigError("conv2d: stride must be >= 1");
    const int batch = sx[0], cin = sx[1], h = sx[2], ww = sx[3];
    const int cout = sw[0], kh = sw[2], kw = sw[3];
    int pad_y = 0, pad_x = 0, oh = 0, ow = 0;
    if (padding == Padding::kSameReflect) {
        if (kh % 2 == 0 || kw % 2 == 0) {
            throw ShapeError("conv2d: same padding requires odd kernel extents");
        }
        pad_y = (kh - 1) / 2;
        pad_x = (kw - 1) / 2;
        oh = (h + 2 * pad_y - kh) / stride + 1;
        ow = (ww + 2 * pad_x - kw) / stride + 1;
    } else {
        if (h < kh || ww < kw) {
            throw ShapeError("conv2d: valid padding needs input >= kernel");
        }
        oh = (h - kh) / stride + 1;
        ow = (ww - kw) / stride + 1;
    }

    // Index tables fold the mirror boundary out of the inner loops.
    std::vector<int> iy_table(static_cast<std::size_t>(oh) * kh);
    std::vector<int> ix_table(static_cast<std::size_t>(ow) * kw);
    for (int oy = 0; oy < oh; ++oy) {
        for (int ky = 0; ky < kh; ++ky) {
            const int iy = oy * stride + ky - pad_y;
            iy_table[static_cast<std::size_t>(oy) * kh + ky] =
                (padding == Padding::kSameReflect) ? mirror_index(iy, h) : iy;
        }
    }
    for (int ox = 0; ox < ow; ++ox) {
        for (int kx = 0; kx < kw; ++kx) {
            const int ix = ox * stride + kx - pad_x;
            ix_table[static_cast<std::size_t>(ox) * kw + kx] =
                (padding == Padding::kSameReflect) ? mirror_index(ix, ww) : ix;
        }
    }

    Node n;
    n.shape = {batch, cout, oh, ow};
    n.value.assign(static_cast<std::size_t>(batch) * cout * oh * ow, 0.0);
    {
        const auto& vx = nodes_[x].value;
        const auto& vw = nodes_[w].value;
        const std::size_t xplane = static_cast<std::size_t>(h) * ww;
        const std::size_t oplane = static_cast<std::size_t>(oh) * ow;
        for (int nb = 0; nb < batch; ++nb) {
            for (int co = 0; co < cout; ++co) {
                double* out_plane = &n.value[(static_cast<std::size_t>(nb) * cout + co) * oplane];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* in_plane =
                        &vx[(static_cast<std::size_t>(nb) * cin + ci) * xplane];
                    const double* wk =
                        &vw[(static_cast<std::size_t>(co) * cin + ci) * kh * kw];
                    for (int oy = 0; oy < oh; ++oy) {
                        const int* iys = &iy_table[static_cast<std::size_t>(oy) * kh];
                        double* orow = &out_plane[static_cast<std::size_t>(oy) * ow];
                        for (int ky = 0; ky < kh; ++ky) {
                            const double* irow = &in_plane[static_cast<std::size_t>(iys[ky]) * ww];
                            const double* wrow = &wk[static_cast<std::size_t>(ky) * kw];
                            for (int ox = 0; ox < ow; ++ox) {
                                const int* ixs = &ix_table[static_cast<std::size_t>(ox) * kw];
                                double acc = 0.0;
                                for (int kx = 0; kx < kw; ++kx) acc += wrow[kx] * irow[ixs[kx]];
                                orow[ox] += acc;
                            }
                        }
                    }
                }
            }
        }
    }
    n.needs_grad = nodes_[x].needs_grad || nodes_[w].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, w, out, batch, cin, cout, h, ww, oh, ow, kh, kw,
                            iy_table = std::move(iy_table),
                            ix_table = std::move(ix_table)](Graph& g) {
        const auto& go = g.nodes_[out].grad;
        const auto& vx = g.nodes_[x].value;
        const auto& vw = g.nodes_[w].value;
        const bool need_x = g.nodes_[x].needs_grad;
        const bool need_w = g.nodes_[w].needs_grad;
        const std::size_t xplane = static_cast<std::size_t>(h) * ww;
        const std::size_t oplane = static_cast<std::size_t>(oh) * ow;
        for (int nb = 0; nb < batch; ++nb) {
            for (int co = 0; co < cout; ++co) {
                const double* gout = &go[(static_cast<std::size_t>(nb) * cout + co) * oplane];
                for (int ci = 0; ci < cin; ++ci) {
                    const double* in_plane =
                        &vx[(static_cast<std::size_t>(nb) * cin + ci) * xplane];
                    const double* wk = &vw[(static_cast<std::size_t>(co) * cin + ci) * kh * kw];
                    double* gx = need_x
                        ? &g.nodes_[x].grad[(static_cast<std::size_t>(nb) * cin + ci) * xplane]
                        : nullptr;
                    double* gw = need_w
                        ? &g.nodes_[w].grad[(static_cast<std::size_t>(co) * cin + ci) * kh * kw]
                        : nullptr;
                    for (int oy = 0; oy < oh; ++oy) {
                        const int* iys = &iy_table[static_cast<std::size_t>(oy) * kh];
                        const double* grow = &gout[static_cast<std::size_t>(oy) * ow];
                        for (int ky = 0; ky < kh; ++ky) {
                            const double* irow = &in_plane[static_cast<std::size_t>(iys[ky]) * ww];
                            double* gxrow =
                                need_x ? &gx[static_cast<std::size_t>(iys[ky]) * ww] : nullptr;
                            for (int ox = 0; ox < ow; ++ox) {
                                const double gv = grow[ox];
                                if (gv == 0.0) continue;
                                const int* ixs = &ix_table[static_cast<std::size_t>(ox) * kw];
                                for (int kx = 0; kx < kw; ++kx) {
                                    if (need_w) {
                                        gw[static_cast<std::size_t>(ky) * kw + kx] +=
                                            irow[ixs[kx]] * gv;
                                    }
                                    if (need_x) {
                                        gxrow[ixs[kx]] +=
                                            wk[static_cast<std::size_t>(ky) * kw + kx] * gv;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    };
    return out;
}

int Graph::nearest_up2(int x) {
    check_id(x);
    const Shape& sx = nodes_[x].shape;
    if (sx.size() != 4) throw ShapeError("nearest_up2: expected [N,C,H,W], got " + shape_str(sx));
    const int batch = sx[0], ch = sx[1], h = sx[2], w = sx[3];
    Node n;
    n.shape = {batch, ch, 2 * h, 2 * w};
    n.value.resize(nodes_[x].value.size() * 4);
    {
        const auto& vx = nodes_[x].value;
        const std::size_t iplane = static_cast<std::size_t>(h) * w;
        const std::size_t oplane = iplane * 4;
        for (int p = 0; p < batch * ch; ++p) {
            const double* in = &vx[p * iplane];
            double* out_plane = &n.value[p * oplane];
            for (int y = 0; y < 2 * h; ++y) {
                const double* irow = &in[static_cast<std::size_t>(y / 2) * w];
                double* orow = &out_plane[static_cast<std::size_t>(y) * 2 * w];
                for (int xx = 0; xx < 2 * w; ++xx) orow[xx] = irow[xx / 2];
            }
        }
    }
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out, batch, ch, h, w](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        auto& gx = g.nodes_[x].grad;
        const std::size_t iplane = static_cast<std::size_t>(h) * w;
        const std::size_t oplane = iplane * 4;
        for (int p = 0; p < batch * ch; ++p) {
            const double* grow_base = &go[p * oplane];
            double* gin = &gx[p * iplane];
            for (int y = 0; y < 2 * h; ++y) {
                const double* orow = &grow_base[static_cast<std::size_t>(y) * 2 * w];
                double* irow = &gin[static_cast<std::size_t>(y / 2) * w];
                for (int xx = 0; xx < 2 * w; ++xx) irow[xx / 2] += orow[xx];
            }
        }
    };
    return out;
}

int Graph::leaky_relu(int x, double slope) {
    check_id(x);
    Node n;
    n.shape = nodes_[x].shape;
    n.value.resize(nodes_[x].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        const double v = nodes_[x].value[i];
        n.value[i] = v > 0.0 ? v : slope * v;
    }
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out, slope](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        const auto& vx = g.nodes_[x].value;
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < go.size(); ++i) {
            gx[i] += go[i] * (vx[i] > 0.0 ? 1.0 : slope);
        }
    };
    return out;
}

int Graph::sigmoid(int x) {
    check_id(x);
    Node n;
    n.shape = nodes_[x].shape;
    n.value.resize(nodes_[x].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) {
        n.value[i] = 1.0 / (1.0 + std::exp(-nodes_[x].value[i]));
    }
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        const auto& vo = g.nodes_[out].value;
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < go.size(); ++i) {
            gx[i] += go[i] * vo[i] * (1.0 - vo[i]);
        }
    };
    return out;
}

int Graph::exp(int x) {
    check_id(x);
    Node n;
    n.shape = nodes_[x].shape;
    n.value.resize(nodes_[x].value.size());
    for (std::size_t i = 0; i < n.value.size(); ++i) n.value[i] = std::exp(nodes_[x].value[i]);
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        const auto& vo = g.nodes_[out].value;
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i] * vo[i];
    };
    return out;
}

int Graph::reshape(int x, Shape shape) {
    check_id(x);
    if (shape_numel(shape) != nodes_[x].value.size()) {
        throw ShapeError("reshape: numel mismatch " + shape_str(nodes_[x].shape) + " -> " +
                         shape_str(shape));
    }
    Node n;
    n.shape = std::move(shape);
    n.value = nodes_[x].value;
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const auto& go = g.nodes_[out].grad;
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < go.size(); ++i) gx[i] += go[i];
    };
    return out;
}

int Graph::mean(int x) {
    check_id(x);
    const double inv = 1.0 / static_cast<double>(nodes_[x].value.size());
    double acc = 0.0;
    for (double v : nodes_[x].value) acc += v;
    Node n;
    n.shape = {1};
    n.value = {acc * inv};
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out, inv](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const double go = g.nodes_[out].grad[0] * inv;
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
    };
    return out;
}

int Graph::sum(int x) {
    check_id(x);
    double acc = 0.0;
    for (double v : nodes_[x].value) acc += v;
    Node n;
    n.shape = {1};
    n.value = {acc};
    n.needs_grad = nodes_[x].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [x, out](Graph& g) {
        if (!g.nodes_[x].needs_grad) return;
        const double go = g.nodes_[out].grad[0];
        auto& gx = g.nodes_[x].grad;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += go;
    };
    return out;
}

int Graph::mse(int pred, int target) {
    check_id(pred);
    check_id(target);
    require_same_shape(nodes_[pred].shape, nodes_[target].shape, "mse");
    const std::size_t count = nodes_[pred].value.size();
    const double inv = 1.0 / static_cast<double>(count);
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double d = nodes_[pred].value[i] - nodes_[target].value[i];
        acc += d * d;
    }
    Node n;
    n.shape = {1};
    n.value = {acc * inv};
    n.needs_grad = nodes_[pred].needs_grad || nodes_[target].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [pred, target, out, inv](Graph& g) {
        const double go = g.nodes_[out].grad[0];
        const auto& vp = g.nodes_[pred].value;
        const auto& vt = g.nodes_[target].value;
        if (g.nodes_[pred].needs_grad) {
            auto& gp = g.nodes_[pred].grad;
            for (std::size_t i = 0; i < vp.size(); ++i) {
                gp[i] += go * 2.0 * inv * (vp[i] - vt[i]);
            }
        }
        if (g.nodes_[target].needs_grad) {
            auto& gt = g.nodes_[target].grad;
            for (std::size_t i = 0; i < vp.size(); ++i) {
                gt[i] -= go * 2.0 * inv * (vp[i] - vt[i]);
            }
        }
    };
    return out;
}

int Graph::gaussian_kl(int mu, int logvar) {
    check_id(mu);
    check_id(logvar);
    require_same_shape(nodes_[mu].shape, nodes_[logvar].shape, "gaussian_kl");
    const std::size_t count = nodes_[mu].value.size();
    const double inv = 1.0 / static_cast<double>(count);
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double m = nodes_[mu].value[i];
        const double lv = nodes_[logvar].value[i];
        acc += 1.0 + lv - m * m - std::exp(lv);
    }
    Node n;
    n.shape = {1};
    n.value = {-0.5 * acc * inv};
    n.needs_grad = nodes_[mu].needs_grad || nodes_[logvar].needs_grad;
    const int out = push(std::move(n));
    nodes_[out].backprop = [mu, logvar, out, inv](Graph& g) {
        const double go = g.nodes_[out].grad[0];
        const auto& vm = g.nodes_[mu].value;
        const auto& vl = g.nodes_[logvar].value;
        if (g.nodes_[mu].needs_grad) {
            auto& gm = g.nodes_[mu].grad;
            for (std::size_t i = 0; i < vm.size(); ++i) gm[i] += go * inv * vm[i];
        }
        if (g.nodes_[logvar].needs_grad) {
            auto& gl = g.nodes_[logvar].grad;
            for (std::size_t i = 0; i < vl.size(); ++i) {
                gl[i] += go * 0.5 * inv * (std::exp(vl[i]) - 1.0);
            }
        }
    };
    return out;
}

void Graph::backward(int loss) {
    check_id(loss);
    if (backward_done_) {
        throw ContractError("Graph: backward() may run once per graph");
    }
    if (nodes_[loss].value.size() != 1) {
        throw ContractError("backward: loss must be scalar, has shape " +
                            shape_str(nodes_[loss].shape));
    }
    backward_done_ = true;
    for (Node& n : nodes_) {
        if (n.needs_grad) n.grad.assign(n.value.size(), 0.0);
    }
    if (!nodes_[loss].needs_grad) {
        // Loss does not depend on any parameter; all gradients stay zero.
        return;
    }
    nodes_[loss].grad[0] = 1.0;
    for (int id = loss; id >= 0; --id) {
        Node& n = nodes_[id];
        if (n.needs_grad && n.backprop) n.backprop(*this);
    }
}

std::span<const double> Graph::grad(int id) const {
    check_id(id);
    if (!backward_done_) throw ContractError("Graph: grad() before backward()");
    if (!nodes_[id].needs_grad) {
        throw ContractError("Graph: node " + std::to_string(id) + " has no gradient");
    }
    return nodes_[id].grad;
}

double Graph::scalar(int id) const {
    check_id(id);
    if (nodes_[id].value.size() != 1) {
        throw ContractError("scalar: node is not scalar");
    }
    return nodes_[id].value[0];
}

Image Graph::value_as_image(int id) const {
    check_id(id);
    const Shape& s = nodes_[id].shape;
    if (s.size() == 4 && s[0] == 1 && s[1] == 1) {
        return Image(s[3], s[2], nodes_[id].value);
    }
    if (s.size() == 2) {
        return Image(s[1], s[0], nodes_[id].value);
    }
    throw ShapeError("value_as_image: node shape " + shape_str(s) + " is not an image");
}

}  // namespace ssae::ad
