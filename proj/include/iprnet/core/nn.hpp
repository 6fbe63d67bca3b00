#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "iprnet/core/autodiff.hpp"
#include "iprnet/core/rng.hpp"

namespace iprnet {

/// Named handle to a model parameter. Trainability is carried by the Var's
/// requires_grad flag; frozen parameters are saved and loaded like any other
/// but skipped by the optimizer.
struct ParamRef {
    std::string name;
    Var var;
    bool trainable() const { return var.requires_grad(); }
};

inline Var relu(const Var& x) {
    Tensor out = x.value();
    const std::int64_t n = out.numel();
    for (std::int64_t i = 0; i < n; ++i)
        if (out[i] < 0.0) out[i] = 0.0;
    if (!x.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {x});
    auto xn = x.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, rn]() {
        const Tensor& g = rn->grad;
        Tensor& gx = xn->ensure_grad();
        const Tensor& xv = xn->value;
        const std::int64_t m = g.numel();
        for (std::int64_t i = 0; i < m; ++i)
            if (xv[i] > 0.0) gx[i] += g[i];
    });
    return r;
}

namespace detail {

inline void conv2d_forward(const Tensor& x, const Tensor& w, const Tensor& b, int stride,
                           int pad, Tensor& out) {
    const int ci_n = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const int co_n = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    const int ho = out.dim(1), wo = out.dim(2);
    for (int co = 0; co < co_n; ++co) {
        double* op = out.channel(co);
        const double bias = b[co];
        for (int i = 0; i < ho * wo; ++i) op[i] = bias;
        for (int ci = 0; ci < ci_n; ++ci) {
            const double* xp = x.channel(ci);
            for (int ky = 0; ky < kh; ++ky) {
                for (int kx = 0; kx < kw; ++kx) {
                    const double coeff =
                        w[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + ky) * kw + kx];
                    if (coeff == 0.0) continue;
                    for (int oy = 0; oy < ho; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= h) continue;
                        double* orow = op + static_cast<std::int64_t>(oy) * wo;
                        const double* irow = xp + static_cast<std::int64_t>(iy) * wd;
                        if (stride == 1) {
                            int ox0 = 0, ox1 = wo;
                            // valid range: 0 <= ox + kx - pad < wd
                            if (kx - pad < 0) ox0 = pad - kx;
                            if (wo + kx - pad > wd) ox1 = wd - kx + pad;
                            const double* ir = irow + kx - pad;
                            for (int ox = ox0; ox < ox1; ++ox) orow[ox] += coeff * ir[ox];
                        } else {
                            for (int ox = 0; ox < wo; ++ox) {
                                const int ix = ox * stride + kx - pad;
                                if (ix < 0 || ix >= wd) continue;
                                orow[ox] += coeff * irow[ix];
                            }
                        }
                    }
                }
            }
        }
    }
}

} // namespace detail

/// 2-D convolution. x: (C_in, H, W), w: (C_out, C_in, kh, kw), b: (C_out).
inline Var conv2d(const Var& x, const Var& w, const Var& b, int stride = 1, int pad = 0) {
    if (x.value().ndim() != 3 || w.value().ndim() != 4)
        throw ShapeError("conv2d: expected x (C,H,W) and w (Co,Ci,kh,kw)");
    if (x.value().dim(0) != w.value().dim(1))
        throw ShapeError("conv2d: input channels " + std::to_string(x.value().dim(0)) +
                         " do not match weight " + std::to_string(w.value().dim(1)));
    const int h = x.value().dim(1), wd = x.value().dim(2);
    const int kh = w.value().dim(2), kw = w.value().dim(3);
    const int ho = (h + 2 * pad - kh) / stride + 1;
    const int wo = (wd + 2 * pad - kw) / stride + 1;
    if (ho <= 0 || wo <= 0) throw ShapeError("conv2d: output would be empty");

    Tensor out({w.value().dim(0), ho, wo});
    detail::conv2d_forward(x.value(), w.value(), b.value(), stride, pad, out);

    if (!x.requires_grad() && !w.requires_grad() && !b.requires_grad())
        return Var(std::move(out));

    Var r = Var::op(std::move(out), {x, w, b});
    auto xn = x.node(), wn = w.node(), bn = b.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, wn, bn, rn, stride, pad]() {
        const Tensor& g = rn->grad;
        const Tensor& xv = xn->value;
        const Tensor& wv = wn->value;
        const int ci_n = xv.dim(0), h = xv.dim(1), wd = xv.dim(2);
        const int co_n = wv.dim(0), kh = wv.dim(2), kw = wv.dim(3);
        const int ho = g.dim(1), wo = g.dim(2);

        if (bn->requires_grad) {
            Tensor& gb = bn->ensure_grad();
            for (int co = 0; co < co_n; ++co) {
                const double* gp = g.channel(co);
                double acc = 0.0;
                for (int i = 0; i < ho * wo; ++i) acc += gp[i];
                gb[co] += acc;
            }
        }
        if (wn->requires_grad) {
            Tensor& gw = wn->ensure_grad();
            for (int co = 0; co < co_n; ++co) {
                const double* gp = g.channel(co);
                for (int ci = 0; ci < ci_n; ++ci) {
                    const double* xp = xv.channel(ci);
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            double acc = 0.0;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                const double* grow = gp + static_cast<std::int64_t>(oy) * wo;
                                const double* irow = xp + static_cast<std::int64_t>(iy) * wd;
                                if (stride == 1) {
                                    int ox0 = 0, ox1 = wo;
                                    if (kx - pad < 0) ox0 = pad - kx;
                                    if (wo + kx - pad > wd) ox1 = wd - kx + pad;
                                    const double* ir = irow + kx - pad;
                                    for (int ox = ox0; ox < ox1; ++ox) acc += grow[ox] * ir[ox];
                                } else {
                                    for (int ox = 0; ox < wo; ++ox) {
                                        const int ix = ox * stride + kx - pad;
                                        if (ix < 0 || ix >= wd) continue;
                                        acc += grow[ox] * irow[ix];
                                    }
                                }
                            }
                            gw[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + ky) * kw + kx] += acc;
                        }
                    }
                }
            }
        }
        if (xn->requires_grad) {
            Tensor& gx = xn->ensure_grad();
            for (int co = 0; co < co_n; ++co) {
                const double* gp = g.channel(co);
                for (int ci = 0; ci < ci_n; ++ci) {
                    double* gxp = gx.channel(ci);
                    for (int ky = 0; ky < kh; ++ky) {
                        for (int kx = 0; kx < kw; ++kx) {
                            const double coeff =
                                wv[((static_cast<std::int64_t>(co) * ci_n + ci) * kh + ky) * kw + kx];
                            if (coeff == 0.0) continue;
                            for (int oy = 0; oy < ho; ++oy) {
                                const int iy = oy * stride + ky - pad;
                                if (iy < 0 || iy >= h) continue;
                                const double* grow = gp + static_cast<std::int64_t>(oy) * wo;
                                double* gxrow = gxp + static_cast<std::int64_t>(iy) * wd;
                                if (stride == 1) {
                                    int ox0 = 0, ox1 = wo;
                                    if (kx - pad < 0) ox0 = pad - kx;
                                    if (wo + kx - pad > wd) ox1 = wd - kx + pad;
                                    double* gr = gxrow + kx - pad;
                                    for (int ox = ox0; ox < ox1; ++ox) gr[ox] += coeff * grow[ox];
                                } else {
                                    for (int ox = 0; ox < wo; ++ox) {
                                        const int ix = ox * stride + kx - pad;
                                        if (ix < 0 || ix >= wd) continue;
                                        gxrow[ix] += coeff * grow[ox];
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return r;
}

/// Adaptive average pooling to an exact output size. For integer factors this
/// reduces to non-overlapping block averaging.
inline Var avg_pool_to(const Var& x, int ho, int wo) {
    if (x.value().ndim() != 3) throw ShapeError("avg_pool_to: expected (C,H,W)");
    if (ho <= 0 || wo <= 0) throw ShapeError("avg_pool_to: non-positive output size");
    const int c_n = x.value().dim(0), h = x.value().dim(1), wd = x.value().dim(2);
    Tensor out({c_n, ho, wo});
    for (int c = 0; c < c_n; ++c) {
        for (int oy = 0; oy < ho; ++oy) {
            const int y0 = oy * h / ho, y1 = ((oy + 1) * h + ho - 1) / ho;
            for (int ox = 0; ox < wo; ++ox) {
                const int x0 = ox * wd / wo, x1 = ((ox + 1) * wd + wo - 1) / wo;
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int xx = x0; xx < x1; ++xx) acc += x.value().at(c, y, xx);
                out.at(c, oy, ox) = acc / static_cast<double>((y1 - y0) * (x1 - x0));
            }
        }
    }
    if (!x.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {x});
    auto xn = x.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, rn, ho, wo]() {
        const Tensor& g = rn->grad;
        Tensor& gx = xn->ensure_grad();
        const int c_n = gx.dim(0), h = gx.dim(1), wd = gx.dim(2);
        for (int c = 0; c < c_n; ++c) {
            for (int oy = 0; oy < ho; ++oy) {
                const int y0 = oy * h / ho, y1 = ((oy + 1) * h + ho - 1) / ho;
                for (int ox = 0; ox < wo; ++ox) {
                    const int x0 = ox * wd / wo, x1 = ((ox + 1) * wd + wo - 1) / wo;
                    const double gv = g.at(c, oy, ox) / static_cast<double>((y1 - y0) * (x1 - x0));
                    for (int y = y0; y < y1; ++y)
                        for (int xx = x0; xx < x1; ++xx) gx.at(c, y, xx) += gv;
                }
            }
        }
    });
    return r;
}

/// Nearest-neighbor resize with the block-center convention:
/// source index = floor((2*i + 1) * in / (2 * out)).
inline int nearest_src(int i, int in_size, int out_size) {
    return static_cast<int>((static_cast<std::int64_t>(2 * i + 1) * in_size) / (2 * out_size));
}

inline Var upsample_nearest(const Var& x, int ho, int wo) {
    if (x.value().ndim() != 3) throw ShapeError("upsample_nearest: expected (C,H,W)");
    const int c_n = x.value().dim(0), h = x.value().dim(1), wd = x.value().dim(2);
    Tensor out({c_n, ho, wo});
    std::vector<int> ys(static_cast<std::size_t>(ho)), xs(static_cast<std::size_t>(wo));
    for (int i = 0; i < ho; ++i) ys[static_cast<std::size_t>(i)] = nearest_src(i, h, ho);
    for (int j = 0; j < wo; ++j) xs[static_cast<std::size_t>(j)] = nearest_src(j, wd, wo);
    for (int c = 0; c < c_n; ++c)
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox)
                out.at(c, oy, ox) = x.value().at(c, ys[static_cast<std::size_t>(oy)],
                                                 xs[static_cast<std::size_t>(ox)]);
    if (!x.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {x});
    auto xn = x.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, rn, ys, xs, ho, wo]() {
        const Tensor& g = rn->grad;
        Tensor& gx = xn->ensure_grad();
        const int c_n = gx.dim(0);
        for (int c = 0; c < c_n; ++c)
            for (int oy = 0; oy < ho; ++oy)
                for (int ox = 0; ox < wo; ++ox)
                    gx.at(c, ys[static_cast<std::size_t>(oy)], xs[static_cast<std::size_t>(ox)]) +=
                        g.at(c, oy, ox);
    });
    return r;
}

/// Concatenate (C_i, h, w) maps along the channel axis.
inline Var concat_channels(const std::vector<Var>& xs) {
    if (xs.empty()) throw DomainError("concat_channels: empty input");
    const int h = xs[0].value().dim(1), wd = xs[0].value().dim(2);
    int c_total = 0;
    bool needs_grad = false;
    for (const auto& x : xs) {
        if (x.value().ndim() != 3 || x.value().dim(1) != h || x.value().dim(2) != wd)
            throw ShapeError("concat_channels: spatial dims must match");
        c_total += x.value().dim(0);
        needs_grad = needs_grad || x.requires_grad();
    }
    Tensor out({c_total, h, wd});
    std::int64_t offset = 0;
    for (const auto& x : xs) {
        const std::int64_t n = x.value().numel();
        for (std::int64_t i = 0; i < n; ++i) out[offset + i] = x.value()[i];
        offset += n;
    }
    if (!needs_grad) return Var(std::move(out));
    Var r = Var::op(std::move(out), xs);
    std::vector<std::shared_ptr<detail::Node>> nodes;
    nodes.reserve(xs.size());
    for (const auto& x : xs) nodes.push_back(x.node());
    detail::Node* rn = r.raw();
    r.set_backward([nodes, rn]() {
        const Tensor& g = rn->grad;
        std::int64_t offset = 0;
        for (const auto& nptr : nodes) {
            const std::int64_t n = nptr->value.numel();
            if (nptr->requires_grad) {
                Tensor& gx = nptr->ensure_grad();
                for (std::int64_t i = 0; i < n; ++i) gx[i] += g[offset + i];
            }
            offset += n;
        }
    });
    return r;
}

/// Softmax over the channel axis of a (C, h, w) map.
inline Var softmax_channels(const Var& x) {
    if (x.value().ndim() != 3) throw ShapeError("softmax_channels: expected (C,H,W)");
    const int c_n = x.value().dim(0), h = x.value().dim(1), wd = x.value().dim(2);
    Tensor out(x.value().shape());
    const std::int64_t plane = static_cast<std::int64_t>(h) * wd;
    for (std::int64_t p = 0; p < plane; ++p) {
        double mx = x.value()[p];
        for (int c = 1; c < c_n; ++c) mx = std::max(mx, x.value()[c * plane + p]);
        double z = 0.0;
        for (int c = 0; c < c_n; ++c) {
            const double e = std::exp(x.value()[c * plane + p] - mx);
            out[c * plane + p] = e;
            z += e;
        }
        for (int c = 0; c < c_n; ++c) out[c * plane + p] /= z;
    }
    if (!x.requires_grad()) return Var(std::move(out));
    Var r = Var::op(std::move(out), {x});
    auto xn = x.node();
    detail::Node* rn = r.raw();
    r.set_backward([xn, rn, c_n, plane]() {
        const Tensor& g = rn->grad;
        const Tensor& s = rn->value;
        Tensor& gx = xn->ensure_grad();
        for (std::int64_t p = 0; p < plane; ++p) {
            double dot = 0.0;
            for (int c = 0; c < c_n; ++c) dot += g[c * plane + p] * s[c * plane + p];
            for (int c = 0; c < c_n; ++c)
                gx[c * plane + p] += s[c * plane + p] * (g[c * plane + p] - dot);
        }
    });
    return r;
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

struct Conv2dLayer {
    Var weight; // (Co, Ci, k, k)
    Var bias;   // (Co)
    int stride = 1;
    int pad = 0;

    Conv2dLayer() = default;

    /// He-normal initialization scaled by fan-in.
    Conv2dLayer(int cin, int cout, int k, int stride_, int pad_, Rng& rng, bool trainable) : stride(stride_), pad(pad_) {
        Tensor w({cout, cin, k, k});
        const double stddev = std::sqrt(2.0 / static_cast<double>(cin * k * k));
        for (std::int64_t i = 0; i < w.numel(); ++i) w[i] = rng.normal(0.0, stddev);
        weight = Var(std::move(w), trainable);
        bias = Var(Tensor({cout}), trainable);
    }

    Var operator()(const Var& x) const { return conv2d(x, weight, bias, stride, pad); }

    void collect(const std::string& prefix, std::vector<ParamRef>& out) const {
        out.push_back({prefix + ".weight", weight});
        out.push_back({prefix + ".bias", bias});
    }
};

inline std::uint64_t checksum_params(const std::vector<ParamRef>& params) {
    std::uint64_t h = 1469598103934665603ULL;
    for (const auto& p : params) {
        const std::uint64_t c = checksum_bytes(p.var.value());
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace iprnet
