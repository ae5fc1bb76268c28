#include "bridgekit/autodiff.hpp"

#include <algorithm>
#include <string>
#include <vector>

namespace bridgekit::ad {

namespace {

template <class S>
S sigmoid(const S& x) {
    using std::exp;
    return S(1.0) / (S(1.0) + exp(-x));
}

void require_rank(const Shape& s, std::size_t rank, const char* op) {
    if (s.size() != rank) {
        fail(ErrorCategory::Shape, std::string(op) + ": expected rank " + std::to_string(rank) + ", got shape " +
                                       shape_string(s));
    }
}

}  // namespace

template <class S>
Var Graph<S>::push(T value, bool requires_grad, std::function<void(Graph&)> backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    if (requires_grad) n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return nodes_.size() - 1;
}

template <class S>
bool Graph<S>::any_requires(std::initializer_list<Var> vs) const {
    return std::any_of(vs.begin(), vs.end(), [this](Var v) { return nodes_[v].requires_grad; });
}

template <class S>
typename Graph<S>::T& Graph<S>::grad_ref(Var v) {
    Node& n = nodes_[v];
    if (n.grad.numel() != n.value.numel() || n.grad.shape() != n.value.shape()) n.grad = T(n.value.shape());
    return n.grad;
}

template <class S>
typename Graph<S>::T Graph<S>::grad(Var v) const {
    const Node& n = nodes_.at(v);
    if (n.grad.shape() != n.value.shape()) return T(n.value.shape());
    return n.grad;
}

template <class S>
Var Graph<S>::input(T value, bool requires_grad) {
    return push(std::move(value), requires_grad, nullptr);
}

template <class S>
void Graph<S>::zero_grad() {
    for (auto& n : nodes_) n.grad = T();
}

template <class S>
void Graph<S>::backward(Var out, const T& seed) {
    require_same_shape(nodes_.at(out).value.shape(), seed.shape(), "backward seed");
    zero_grad();
    grad_ref(out) = seed;
    for (Var i = out + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || !n.backward || n.grad.shape() != n.value.shape()) continue;
        n.backward(*this);
    }
}

template <class S>
Var Graph<S>::linear(Var x, Var w, Var b) {
    const Shape& xs = value(x).shape();
    const Shape& ws = value(w).shape();
    require_rank(xs, 2, "linear input");
    require_rank(ws, 2, "linear weight");
    const std::size_t N = xs[0], in = xs[1], outf = ws[0];
    if (ws[1] != in || value(b).numel() != outf) {
        fail(ErrorCategory::Shape, "linear: input " + shape_string(xs) + " incompatible with weight " +
                                       shape_string(ws));
    }
    T y({N, outf});
    {
        const S* X = value(x).data().data();
        const S* W = value(w).data().data();
        const S* B = value(b).data().data();
        S* Y = y.data().data();
        for (std::size_t n = 0; n < N; ++n) {
            for (std::size_t o = 0; o < outf; ++o) {
                S acc = B[o];
                const S* wr = W + o * in;
                const S* xr = X + n * in;
                for (std::size_t i = 0; i < in; ++i) acc += wr[i] * xr[i];
                Y[n * outf + o] = acc;
            }
        }
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x, w, b}), [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        const S* X = g.value(x).data().data();
        const S* W = g.value(w).data().data();
        if (g.nodes_[x].requires_grad) {
            S* dX = g.grad_ref(x).data().data();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < outf; ++o) {
                    const S d = dY[n * outf + o];
                    const S* wr = W + o * in;
                    S* dxr = dX + n * in;
                    for (std::size_t i = 0; i < in; ++i) dxr[i] += d * wr[i];
                }
        }
        if (g.nodes_[w].requires_grad) {
            S* dW = g.grad_ref(w).data().data();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < outf; ++o) {
                    const S d = dY[n * outf + o];
                    const S* xr = X + n * in;
                    S* dwr = dW + o * in;
                    for (std::size_t i = 0; i < in; ++i) dwr[i] += d * xr[i];
                }
        }
        if (g.nodes_[b].requires_grad) {
            S* dB = g.grad_ref(b).data().data();
            for (std::size_t n = 0; n < N; ++n)
                for (std::size_t o = 0; o < outf; ++o) dB[o] += dY[n * outf + o];
        }
    });
}

template <class S>
Var Graph<S>::conv2d(Var x, Var w, Var b, int stride, int pad) {
    const Shape& xs = value(x).shape();
    const Shape& ws = value(w).shape();
    require_rank(xs, 4, "conv2d input");
    require_rank(ws, 4, "conv2d weight");
    const long N = xs[0], C = xs[1], H = xs[2], W = xs[3];
    const long O = ws[0], K = ws[2];
    if (static_cast<long>(ws[1]) != C || static_cast<long>(ws[3]) != K ||
        static_cast<long>(value(b).numel()) != O) {
        fail(ErrorCategory::Shape, "conv2d: input " + shape_string(xs) + " incompatible with weight " +
                                       shape_string(ws));
    }
    const long Ho = (H + 2 * pad - K) / stride + 1;
    const long Wo = (W + 2 * pad - K) / stride + 1;
    if (Ho <= 0 || Wo <= 0) fail(ErrorCategory::Shape, "conv2d: kernel larger than padded input");

    // Lowered to a matrix product per sample: col (C k k, Ho Wo) holds the
    // receptive fields, so the inner loops run over contiguous output rows.
    const long CKK = C * K * K, P = Ho * Wo;
    auto im2col = [=](const S* X, long n, S* col) {
        for (long c = 0; c < C; ++c)
            for (long ky = 0; ky < K; ++ky)
                for (long kx = 0; kx < K; ++kx) {
                    S* dst = col + ((c * K + ky) * K + kx) * P;
                    for (long oy = 0; oy < Ho; ++oy) {
                        const long iy = oy * stride + ky - pad;
                        for (long ox = 0; ox < Wo; ++ox) {
                            const long ix = ox * stride + kx - pad;
                            dst[oy * Wo + ox] = (iy < 0 || iy >= H || ix < 0 || ix >= W)
                                                    ? S{}
                                                    : X[((n * C + c) * H + iy) * W + ix];
                        }
                    }
                }
    };

    T y({static_cast<std::size_t>(N), static_cast<std::size_t>(O), static_cast<std::size_t>(Ho),
         static_cast<std::size_t>(Wo)});
    {
        const S* X = value(x).data().data();
        const S* Wt = value(w).data().data();
        const S* B = value(b).data().data();
        S* Y = y.data().data();
        std::vector<S> col(static_cast<std::size_t>(CKK * P));
        for (long n = 0; n < N; ++n) {
            im2col(X, n, col.data());
            for (long o = 0; o < O; ++o) {
                S* yr = Y + (n * O + o) * P;
                std::fill(yr, yr + P, B[o]);
                const S* wr = Wt + o * CKK;
                for (long k = 0; k < CKK; ++k) {
                    const S wv = wr[k];
                    const S* cr = col.data() + k * P;
                    for (long p = 0; p < P; ++p) yr[p] += wv * cr[p];
                }
            }
        }
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x, w, b}), [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        const S* X = g.value(x).data().data();
        const S* Wt = g.value(w).data().data();
        const bool need_x = g.nodes_[x].requires_grad;
        const bool need_w = g.nodes_[w].requires_grad;
        S* dX = need_x ? g.grad_ref(x).data().data() : nullptr;
        S* dW = need_w ? g.grad_ref(w).data().data() : nullptr;
        std::vector<S> col(static_cast<std::size_t>(CKK * P));
        std::vector<S> colT(need_w ? static_cast<std::size_t>(CKK * P) : 0);
        std::vector<S> dcol(need_x ? static_cast<std::size_t>(CKK * P) : 0);
        for (long n = 0; n < N; ++n) {
            if (need_w) {
                // Transposed receptive fields (Ho Wo, C k k) keep the update an axpy over k.
                im2col(X, n, col.data());
                for (long k = 0; k < CKK; ++k)
                    for (long p = 0; p < P; ++p) colT[p * CKK + k] = col[k * P + p];
                for (long o = 0; o < O; ++o) {
                    const S* dyr = dY + (n * O + o) * P;
                    S* dwr = dW + o * CKK;
                    for (long p = 0; p < P; ++p) {
                        const S d = dyr[p];
                        const S* cr = colT.data() + p * CKK;
                        for (long k = 0; k < CKK; ++k) dwr[k] += d * cr[k];
                    }
                }
            }
            if (need_x) {
                std::fill(dcol.begin(), dcol.end(), S{});
                for (long o = 0; o < O; ++o) {
                    const S* dyr = dY + (n * O + o) * P;
                    const S* wr = Wt + o * CKK;
                    for (long k = 0; k < CKK; ++k) {
                        const S wv = wr[k];
                        S* dc = dcol.data() + k * P;
                        for (long p = 0; p < P; ++p) dc[p] += wv * dyr[p];
                    }
                }
                for (long c = 0; c < C; ++c)
                    for (long ky = 0; ky < K; ++ky)
                        for (long kx = 0; kx < K; ++kx) {
                            const S* src = dcol.data() + ((c * K + ky) * K + kx) * P;
                            for (long oy = 0; oy < Ho; ++oy) {
                                const long iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= H) continue;
                                for (long ox = 0; ox < Wo; ++ox) {
                                    const long ix = ox * stride + kx - pad;
                                    if (ix >= 0 && ix < W) dX[((n * C + c) * H + iy) * W + ix] += src[oy * Wo + ox];
                                }
                            }
                        }
            }
        }
        if (g.nodes_[b].requires_grad) {
            S* dB = g.grad_ref(b).data().data();
            for (long n = 0; n < N; ++n)
                for (long o = 0; o < O; ++o) {
                    const S* dyr = dY + (n * O + o) * P;
                    S acc{};
                    for (long k = 0; k < P; ++k) acc += dyr[k];
                    dB[o] += acc;
                }
        }
    });
}

template <class S>
Var Graph<S>::add(Var a, Var b) {
    require_same_shape(value(a).shape(), value(b).shape(), "add");
    T y = value(a);
    {
        auto yb = y.data();
        auto bb = value(b).data();
        for (std::size_t i = 0; i < yb.size(); ++i) yb[i] += bb[i];
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({a, b}), [=](Graph& g) {
        for (Var in : {a, b}) {
            if (!g.nodes_[in].requires_grad) continue;
            auto d = g.grad_ref(in).data();
            auto dy = g.nodes_[self].grad.data();
            for (std::size_t i = 0; i < d.size(); ++i) d[i] += dy[i];
        }
    });
}

template <class S>
Var Graph<S>::add_channel(Var x, Var e) {
    const Shape& xs = value(x).shape();
    const Shape& es = value(e).shape();
    require_rank(es, 2, "add_channel embedding");
    if (xs.size() < 2 || xs[0] != es[0] || xs[1] != es[1]) {
        fail(ErrorCategory::Shape, "add_channel: " + shape_string(xs) + " vs " + shape_string(es));
    }
    const std::size_t N = xs[0], C = xs[1];
    const std::size_t inner = value(x).numel() / (N * C);
    T y = value(x);
    {
        S* Y = y.data().data();
        const S* E = value(e).data().data();
        for (std::size_t nc = 0; nc < N * C; ++nc)
            for (std::size_t k = 0; k < inner; ++k) Y[nc * inner + k] += E[nc];
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x, e}), [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        if (g.nodes_[x].requires_grad) {
            auto dX = g.grad_ref(x).data();
            for (std::size_t i = 0; i < dX.size(); ++i) dX[i] += dY[i];
        }
        if (g.nodes_[e].requires_grad) {
            S* dE = g.grad_ref(e).data().data();
            for (std::size_t nc = 0; nc < N * C; ++nc) {
                S acc{};
                for (std::size_t k = 0; k < inner; ++k) acc += dY[nc * inner + k];
                dE[nc] += acc;
            }
        }
    });
}

template <class S>
Var Graph<S>::silu(Var x) {
    T y(value(x).shape());
    {
        auto xv = value(x).data();
        auto yv = y.data();
        for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = xv[i] * sigmoid(xv[i]);
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        auto xv = g.value(x).data();
        auto dy = g.nodes_[self].grad.data();
        auto dx = g.grad_ref(x).data();
        for (std::size_t i = 0; i < dx.size(); ++i) {
            const S s = sigmoid(xv[i]);
            dx[i] += dy[i] * s * (S(1.0) + xv[i] * (S(1.0) - s));
        }
    });
}

template <class S>
Var Graph<S>::leaky_relu(Var x, double slope) {
    T y(value(x).shape());
    {
        auto xv = value(x).data();
        auto yv = y.data();
        for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = value_of(xv[i]) > 0.0 ? xv[i] : S(slope) * xv[i];
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        auto xv = g.value(x).data();
        auto dy = g.nodes_[self].grad.data();
        auto dx = g.grad_ref(x).data();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += value_of(xv[i]) > 0.0 ? dy[i] : S(slope) * dy[i];
    });
}

template <class S>
Var Graph<S>::tanh(Var x) {
    using std::tanh;
    T y(value(x).shape());
    {
        auto xv = value(x).data();
        auto yv = y.data();
        for (std::size_t i = 0; i < yv.size(); ++i) yv[i] = tanh(xv[i]);
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        auto yv = g.nodes_[self].value.data();
        auto dy = g.nodes_[self].grad.data();
        auto dx = g.grad_ref(x).data();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i] * (S(1.0) - yv[i] * yv[i]);
    });
}

template <class S>
Var Graph<S>::concat(const std::vector<Var>& parts) {
    if (parts.empty()) fail(ErrorCategory::Shape, "concat: no inputs");
    Shape base = value(parts[0]).shape();
    if (base.size() < 2) fail(ErrorCategory::Shape, "concat: inputs need rank >= 2");
    const std::size_t N = base[0];
    const std::size_t inner = value(parts[0]).numel() / (N * base[1]);
    std::size_t channels = 0;
    bool req = false;
    for (Var p : parts) {
        const Shape& s = value(p).shape();
        Shape a(s), b(base);
        if (a.size() != b.size()) fail(ErrorCategory::Shape, "concat: rank mismatch");
        a[1] = b[1] = 0;
        if (a != b) fail(ErrorCategory::Shape, "concat: " + shape_string(s) + " vs " + shape_string(base));
        channels += s[1];
        req = req || nodes_[p].requires_grad;
    }
    Shape out_shape = base;
    out_shape[1] = channels;
    T y(out_shape);
    {
        S* Y = y.data().data();
        std::size_t offset = 0;
        for (Var p : parts) {
            const std::size_t cp = value(p).shape()[1];
            const S* P = value(p).data().data();
            for (std::size_t n = 0; n < N; ++n)
                std::copy(P + n * cp * inner, P + (n + 1) * cp * inner, Y + (n * channels + offset) * inner);
            offset += cp;
        }
    }
    Var self = nodes_.size();
    return push(std::move(y), req, [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        std::size_t offset = 0;
        for (Var p : parts) {
            const std::size_t cp = g.value(p).shape()[1];
            if (g.nodes_[p].requires_grad) {
                S* dP = g.grad_ref(p).data().data();
                for (std::size_t n = 0; n < N; ++n)
                    for (std::size_t k = 0; k < cp * inner; ++k)
                        dP[n * cp * inner + k] += dY[(n * channels + offset) * inner + k];
            }
            offset += cp;
        }
    });
}

template <class S>
Var Graph<S>::avgpool2(Var x) {
    const Shape& xs = value(x).shape();
    require_rank(xs, 4, "avgpool2");
    if (xs[2] % 2 || xs[3] % 2) fail(ErrorCategory::Shape, "avgpool2: odd spatial size " + shape_string(xs));
    const std::size_t NC = xs[0] * xs[1], H = xs[2], W = xs[3], Ho = H / 2, Wo = W / 2;
    T y({xs[0], xs[1], Ho, Wo});
    {
        const S* X = value(x).data().data();
        S* Y = y.data().data();
        for (std::size_t nc = 0; nc < NC; ++nc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    const S* p = X + (nc * H + 2 * oy) * W + 2 * ox;
                    Y[(nc * Ho + oy) * Wo + ox] = S(0.25) * (p[0] + p[1] + p[W] + p[W + 1]);
                }
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        S* dX = g.grad_ref(x).data().data();
        for (std::size_t nc = 0; nc < NC; ++nc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) {
                    const S d = S(0.25) * dY[(nc * Ho + oy) * Wo + ox];
                    S* p = dX + (nc * H + 2 * oy) * W + 2 * ox;
                    p[0] += d;
                    p[1] += d;
                    p[W] += d;
                    p[W + 1] += d;
                }
    });
}

template <class S>
Var Graph<S>::upsample2(Var x) {
    const Shape& xs = value(x).shape();
    require_rank(xs, 4, "upsample2");
    const std::size_t NC = xs[0] * xs[1], H = xs[2], W = xs[3], Ho = 2 * H, Wo = 2 * W;
    T y({xs[0], xs[1], Ho, Wo});
    {
        const S* X = value(x).data().data();
        S* Y = y.data().data();
        for (std::size_t nc = 0; nc < NC; ++nc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) Y[(nc * Ho + oy) * Wo + ox] = X[(nc * H + oy / 2) * W + ox / 2];
    }
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        const S* dY = g.nodes_[self].grad.data().data();
        S* dX = g.grad_ref(x).data().data();
        for (std::size_t nc = 0; nc < NC; ++nc)
            for (std::size_t oy = 0; oy < Ho; ++oy)
                for (std::size_t ox = 0; ox < Wo; ++ox) dX[(nc * H + oy / 2) * W + ox / 2] += dY[(nc * Ho + oy) * Wo + ox];
    });
}

template <class S>
Var Graph<S>::reshape(Var x, Shape shape) {
    T y = value(x);
    y.reshape(std::move(shape));
    Var self = nodes_.size();
    return push(std::move(y), any_requires({x}), [=](Graph& g) {
        auto dy = g.nodes_[self].grad.data();
        auto dx = g.grad_ref(x).data();
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += dy[i];
    });
}

template class Graph<double>;
template class Graph<Dual>;

}  // namespace bridgekit::ad
