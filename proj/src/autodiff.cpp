#include "datta/autodiff.hpp"

#include <cmath>
#include <memory>

#include "datta/kernels.hpp"

namespace datta {

Tensor &Tape::grad_of(VarId id) {
    Node &n = node(id);
    if (n.grad.data.empty()) n.grad = Tensor(n.value.shape);
    return n.grad;
}

VarId Tape::push(Tensor value, std::function<void(Tape &, Node &)> backfn) {
    nodes_.push_back(Node{std::move(value), Tensor{}, std::move(backfn), nullptr, {}, {}});
    return static_cast<VarId>(nodes_.size() - 1);
}

VarId Tape::leaf(Tensor value) { return push(std::move(value), nullptr); }

VarId Tape::param(Param &p) {
    VarId id = push(p.value, nullptr);
    node(id).bound = &p;
    return id;
}

VarId Tape::add(VarId a, VarId b) {
    const Tensor &va = value(a), &vb = value(b);
    if (!va.same_shape(vb)) throw ShapeError("add: " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out(va.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = va.data[i] + vb.data[i];
    return push(std::move(out), [a, b](Tape &t, Node &self) {
        Tensor &ga = t.grad_of(a);
        Tensor &gb = t.grad_of(b);
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
            ga.data[i] += self.grad.data[i];
            gb.data[i] += self.grad.data[i];
        }
    });
}

VarId Tape::sub(VarId a, VarId b) {
    const Tensor &va = value(a), &vb = value(b);
    if (!va.same_shape(vb)) throw ShapeError("sub: " + va.shape_str() + " vs " + vb.shape_str());
    Tensor out(va.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = va.data[i] - vb.data[i];
    return push(std::move(out), [a, b](Tape &t, Node &self) {
        Tensor &ga = t.grad_of(a);
        Tensor &gb = t.grad_of(b);
        for (int64_t i = 0; i < self.grad.numel(); ++i) {
            ga.data[i] += self.grad.data[i];
            gb.data[i] -= self.grad.data[i];
        }
    });
}

VarId Tape::affine(VarId x, float scale, float offset) {
    const Tensor &vx = value(x);
    Tensor out(vx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = scale * vx.data[i] + offset;
    return push(std::move(out), [x, scale](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i) gx.data[i] += scale * self.grad.data[i];
    });
}

VarId Tape::add_const(VarId x, Tensor c) {
    const Tensor &vx = value(x);
    if (!vx.same_shape(c)) throw ShapeError("add_const: shape mismatch");
    Tensor out(vx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = vx.data[i] + c.data[i];
    return push(std::move(out), [x](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i) gx.data[i] += self.grad.data[i];
    });
}

VarId Tape::relu(VarId x) {
    const Tensor &vx = value(x);
    Tensor out(vx.shape);
    // NaN must propagate so non-finite losses get detected upstream
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = vx.data[i] < 0.0f ? 0.0f : vx.data[i];
    return push(std::move(out), [x](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (vx.data[i] > 0.0f) gx.data[i] += self.grad.data[i];
    });
}

VarId Tape::log(VarId x) {
    const Tensor &vx = value(x);
    Tensor out(vx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = std::log(vx.data[i]);
    return push(std::move(out), [x](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i) gx.data[i] += self.grad.data[i] / vx.data[i];
    });
}

VarId Tape::square(VarId x) {
    const Tensor &vx = value(x);
    Tensor out(vx.shape);
    for (int64_t i = 0; i < out.numel(); ++i) out.data[i] = vx.data[i] * vx.data[i];
    return push(std::move(out), [x](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            gx.data[i] += 2.0f * vx.data[i] * self.grad.data[i];
    });
}

VarId Tape::clamp(VarId x, float lo, float hi) {
    const Tensor &vx = value(x);
    Tensor out(vx.shape);
    for (int64_t i = 0; i < out.numel(); ++i)
        out.data[i] = vx.data[i] < lo ? lo : (vx.data[i] > hi ? hi : vx.data[i]);
    return push(std::move(out), [x, lo, hi](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            if (vx.data[i] > lo && vx.data[i] < hi) gx.data[i] += self.grad.data[i];
    });
}

VarId Tape::linear(VarId x, VarId w, VarId b) {
    const Tensor &vx = value(x), &vw = value(w);
    if (vw.rank() != 2) throw ShapeError("linear: weight must be rank 2");
    const int64_t k = vw.dim(0), m = vw.dim(1);
    if (vx.dim(vx.rank() - 1) != k) throw ShapeError("linear: inner dim mismatch");
    const int64_t rows = vx.numel() / k;
    std::vector<int64_t> out_shape = vx.shape;
    out_shape.back() = m;
    Tensor out(out_shape);
    kernels::mm(vx.ptr(), vw.ptr(), out.ptr(), rows, m, k, false, false, false);
    if (b >= 0) {
        const Tensor &vb = value(b);
        if (vb.numel() != m) throw ShapeError("linear: bias dim mismatch");
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < m; ++j) out.data[r * m + j] += vb.data[j];
    }
    return push(std::move(out), [x, w, b, rows, m, k](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        const Tensor &vw = t.value(w);
        kernels::mm(self.grad.ptr(), vw.ptr(), t.grad_of(x).ptr(), rows, k, m, false, true, true);
        kernels::mm(vx.ptr(), self.grad.ptr(), t.grad_of(w).ptr(), k, m, rows, true, false, true);
        if (b >= 0) {
            Tensor &gb = t.grad_of(b);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < m; ++j) gb.data[j] += self.grad.data[r * m + j];
        }
    });
}

VarId Tape::bmm(VarId a, VarId b, bool ta, bool tb) {
    const Tensor &va = value(a), &vb = value(b);
    if (va.rank() != 3 || vb.rank() != 3 || va.dim(0) != vb.dim(0))
        throw ShapeError("bmm: need rank-3 operands with matching batch");
    const int64_t batch = va.dim(0);
    const int64_t m = ta ? va.dim(2) : va.dim(1);
    const int64_t k = ta ? va.dim(1) : va.dim(2);
    const int64_t kb = tb ? vb.dim(2) : vb.dim(1);
    const int64_t n = tb ? vb.dim(1) : vb.dim(2);
    if (k != kb) throw ShapeError("bmm: inner dim mismatch");
    Tensor out({batch, m, n});
    const int64_t sa = va.dim(1) * va.dim(2), sb = vb.dim(1) * vb.dim(2), sc = m * n;
    kernels::bmm(va.ptr(), vb.ptr(), out.ptr(), batch, m, n, k, ta, tb, false, sa, sb, sc);
    return push(std::move(out), [a, b, ta, tb, batch, m, n, k, sa, sb, sc](Tape &t, Node &self) {
        const Tensor &va = t.value(a);
        const Tensor &vb = t.value(b);
        float *ga = t.grad_of(a).ptr();
        float *gb = t.grad_of(b).ptr();
        const float *g = self.grad.ptr();
        if (!ta && !tb) {
            kernels::bmm(g, vb.ptr(), ga, batch, m, k, n, false, true, true, sc, sb, sa);
            kernels::bmm(va.ptr(), g, gb, batch, k, n, m, true, false, true, sa, sc, sb);
        } else if (!ta && tb) {
            kernels::bmm(g, vb.ptr(), ga, batch, m, k, n, false, false, true, sc, sb, sa);
            kernels::bmm(g, va.ptr(), gb, batch, n, k, m, true, false, true, sc, sa, sb);
        } else if (ta && !tb) {
            kernels::bmm(vb.ptr(), g, ga, batch, k, m, n, false, true, true, sb, sc, sa);
            kernels::bmm(va.ptr(), g, gb, batch, k, n, m, false, false, true, sa, sc, sb);
        } else {
            kernels::bmm(vb.ptr(), g, ga, batch, k, m, n, true, true, true, sb, sc, sa);
            kernels::bmm(g, va.ptr(), gb, batch, n, k, m, true, true, true, sc, sa, sb);
        }
    });
}

VarId Tape::conv1d(VarId x, VarId w, VarId b, int64_t stride) {
    const Tensor &vx = value(x), &vw = value(w);
    if (vx.rank() != 3 || vw.rank() != 3) throw ShapeError("conv1d: need rank-3 input and weight");
    const int64_t batch = vx.dim(0), c_in = vx.dim(1), t_in = vx.dim(2);
    const int64_t c_out = vw.dim(0), kernel = vw.dim(2);
    if (vw.dim(1) != c_in) throw ShapeError("conv1d: channel mismatch");
    const int64_t t_out = (t_in - kernel) / stride + 1;
    Tensor out({batch, t_out, c_out});
    const float *bias = b >= 0 ? value(b).ptr() : nullptr;
    kernels::conv1d_fwd(vx.ptr(), vw.ptr(), bias, out.ptr(), batch, c_in, t_in, c_out, kernel,
                        stride);
    return push(std::move(out),
                [x, w, b, batch, c_in, t_in, c_out, kernel, stride, t_out](Tape &t, Node &self) {
                    const Tensor &vx = t.value(x);
                    const Tensor &vw = t.value(w);
                    kernels::conv1d_bwd_data(self.grad.ptr(), vw.ptr(), t.grad_of(x).ptr(), batch,
                                             c_in, t_in, c_out, kernel, stride);
                    float *gbias = b >= 0 ? t.grad_of(b).ptr() : nullptr;
                    kernels::conv1d_bwd_weight(self.grad.ptr(), vx.ptr(), t.grad_of(w).ptr(), gbias,
                                               batch, c_in, t_in, c_out, kernel, stride);
                    (void)t_out;
                });
}

VarId Tape::gaussian_pos_encoding(VarId x, VarId centers, VarId widths) {
    const Tensor &vx = value(x);
    const Tensor &vc = value(centers);
    const Tensor &vw = value(widths);
    if (vx.rank() != 3) throw ShapeError("gaussian_pos_encoding: need (B,T,E)");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    if (vc.numel() != e || vw.numel() != e) throw ShapeError("gaussian_pos_encoding: param dims");
    Tensor pe({tt, e});
    for (int64_t ti = 0; ti < tt; ++ti)
        for (int64_t j = 0; j < e; ++j) {
            const float d = static_cast<float>(ti) - vc.data[j];
            const float w2 = vw.data[j] * vw.data[j] + 1e-8f;
            pe.at2(ti, j) = std::exp(-0.5f * d * d / w2);
        }
    Tensor out(vx.shape);
    for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t ti = 0; ti < tt; ++ti)
            for (int64_t j = 0; j < e; ++j) out.at3(bi, ti, j) = vx.at3(bi, ti, j) + pe.at2(ti, j);
    return push(std::move(out), [x, centers, widths, batch, tt, e, pe](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        Tensor &gc = t.grad_of(centers);
        Tensor &gw = t.grad_of(widths);
        const Tensor &vc = t.value(centers);
        const Tensor &vw = t.value(widths);
        for (int64_t i = 0; i < self.grad.numel(); ++i) gx.data[i] += self.grad.data[i];
        for (int64_t j = 0; j < e; ++j) {
            const float w2 = vw.data[j] * vw.data[j] + 1e-8f;
            float acc_c = 0.0f, acc_w = 0.0f;
            for (int64_t ti = 0; ti < tt; ++ti) {
                const float d = static_cast<float>(ti) - vc.data[j];
                float gsum = 0.0f;
                for (int64_t bi = 0; bi < batch; ++bi)
                    gsum += self.grad.data[(bi * tt + ti) * e + j];
                const float p = pe.at2(ti, j);
                acc_c += gsum * p * d / w2;
                acc_w += gsum * p * d * d * vw.data[j] / (w2 * w2);
            }
            gc.data[j] += acc_c;
            gw.data[j] += acc_w;
        }
    });
}

VarId Tape::prepend_token(VarId x, VarId token) {
    const Tensor &vx = value(x);
    const Tensor &vt = value(token);
    if (vx.rank() != 3) throw ShapeError("prepend_token: need (B,T,E)");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    if (vt.numel() != e) throw ShapeError("prepend_token: token dim mismatch");
    Tensor out({batch, tt + 1, e});
    for (int64_t bi = 0; bi < batch; ++bi) {
        for (int64_t j = 0; j < e; ++j) out.at3(bi, 0, j) = vt.data[j];
        for (int64_t ti = 0; ti < tt; ++ti)
            for (int64_t j = 0; j < e; ++j) out.at3(bi, ti + 1, j) = vx.at3(bi, ti, j);
    }
    return push(std::move(out), [x, token, batch, tt, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        Tensor &gt = t.grad_of(token);
        for (int64_t bi = 0; bi < batch; ++bi) {
            for (int64_t j = 0; j < e; ++j) gt.data[j] += self.grad.at3(bi, 0, j);
            for (int64_t ti = 0; ti < tt; ++ti)
                for (int64_t j = 0; j < e; ++j) gx.at3(bi, ti, j) += self.grad.at3(bi, ti + 1, j);
        }
    });
}

VarId Tape::row(VarId x, int64_t r) {
    const Tensor &vx = value(x);
    if (vx.rank() != 3) throw ShapeError("row: need (B,T,E)");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    if (r < 0 || r >= tt) throw ShapeError("row: index out of range");
    Tensor out({batch, e});
    for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t j = 0; j < e; ++j) out.at2(bi, j) = vx.at3(bi, r, j);
    return push(std::move(out), [x, r, batch, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t j = 0; j < e; ++j) gx.at3(bi, r, j) += self.grad.at2(bi, j);
    });
}

VarId Tape::slice_axis1(VarId x, int64_t off, int64_t len) {
    const Tensor &vx = value(x);
    if (vx.rank() != 3) throw ShapeError("slice_axis1: need (B,T,E)");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    if (off < 0 || off + len > tt) throw ShapeError("slice_axis1: out of range");
    Tensor out({batch, len, e});
    for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t ti = 0; ti < len; ++ti)
            for (int64_t j = 0; j < e; ++j) out.at3(bi, ti, j) = vx.at3(bi, off + ti, j);
    return push(std::move(out), [x, off, len, batch, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t ti = 0; ti < len; ++ti)
                for (int64_t j = 0; j < e; ++j)
                    gx.at3(bi, off + ti, j) += self.grad.at3(bi, ti, j);
    });
}

VarId Tape::slice_lastdim(VarId x, int64_t off, int64_t len) {
    const Tensor &vx = value(x);
    const int64_t e = vx.dim(vx.rank() - 1);
    if (off < 0 || off + len > e) throw ShapeError("slice_lastdim: out of range");
    const int64_t rows = vx.numel() / e;
    std::vector<int64_t> out_shape = vx.shape;
    out_shape.back() = len;
    Tensor out(out_shape);
    for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < len; ++j) out.data[r * len + j] = vx.data[r * e + off + j];
    return push(std::move(out), [x, off, len, rows, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < len; ++j)
                gx.data[r * e + off + j] += self.grad.data[r * len + j];
    });
}

VarId Tape::concat_lastdim(const std::vector<VarId> &xs) {
    if (xs.empty()) throw ShapeError("concat_lastdim: empty input");
    int64_t total = 0;
    const Tensor &v0 = value(xs[0]);
    const int64_t rows = v0.numel() / v0.dim(v0.rank() - 1);
    for (VarId id : xs) total += value(id).dim(value(id).rank() - 1);
    std::vector<int64_t> out_shape = v0.shape;
    out_shape.back() = total;
    Tensor out(out_shape);
    int64_t off = 0;
    for (VarId id : xs) {
        const Tensor &v = value(id);
        const int64_t len = v.dim(v.rank() - 1);
        for (int64_t r = 0; r < rows; ++r)
            for (int64_t j = 0; j < len; ++j) out.data[r * total + off + j] = v.data[r * len + j];
        off += len;
    }
    std::vector<VarId> parents = xs;
    return push(std::move(out), [parents, rows, total](Tape &t, Node &self) {
        int64_t off = 0;
        for (VarId id : parents) {
            const int64_t len = t.value(id).dim(t.value(id).rank() - 1);
            Tensor &g = t.grad_of(id);
            for (int64_t r = 0; r < rows; ++r)
                for (int64_t j = 0; j < len; ++j)
                    g.data[r * len + j] += self.grad.data[r * total + off + j];
            off += len;
        }
    });
}

VarId Tape::layernorm(VarId x, VarId gain, VarId bias, float eps) {
    const Tensor &vx = value(x);
    const Tensor &vg = value(gain);
    const Tensor &vb = value(bias);
    const int64_t cols = vx.dim(vx.rank() - 1);
    if (vg.numel() != cols || vb.numel() != cols) throw ShapeError("layernorm: param dims");
    const int64_t rows = vx.numel() / cols;
    Tensor out(vx.shape);
    std::vector<float> mean(static_cast<size_t>(rows)), inv_std(static_cast<size_t>(rows));
    kernels::layernorm_fwd(vx.ptr(), vg.ptr(), vb.ptr(), out.ptr(), mean.data(), inv_std.data(),
                           rows, cols, eps);
    VarId id = push(Tensor{}, nullptr);
    Node &n = node(id);
    n.value = std::move(out);
    n.aux0 = std::move(mean);
    n.aux1 = std::move(inv_std);
    n.backfn = [x, gain, bias, rows, cols](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        const Tensor &vg = t.value(gain);
        kernels::layernorm_bwd(vx.ptr(), vg.ptr(), self.grad.ptr(), self.aux0.data(),
                               self.aux1.data(), t.grad_of(x).ptr(), t.grad_of(gain).ptr(),
                               t.grad_of(bias).ptr(), rows, cols);
    };
    return id;
}

VarId Tape::softmax_lastdim(VarId x) {
    const Tensor &vx = value(x);
    const int64_t cols = vx.dim(vx.rank() - 1);
    const int64_t rows = vx.numel() / cols;
    Tensor out(vx.shape);
    kernels::softmax_rows(vx.ptr(), out.ptr(), rows, cols);
    return push(std::move(out), [x, rows, cols](Tape &t, Node &self) {
        kernels::softmax_rows_bwd(self.value.ptr(), self.grad.ptr(), t.grad_of(x).ptr(), rows,
                                  cols);
    });
}

VarId Tape::grl(VarId x, float lambda) {
    Tensor out = value(x);
    return push(std::move(out), [x, lambda](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        for (int64_t i = 0; i < self.grad.numel(); ++i)
            gx.data[i] += -lambda * self.grad.data[i];
    });
}

VarId Tape::reduce_mean_axis1(VarId x) {
    const Tensor &vx = value(x);
    if (vx.rank() != 3) throw ShapeError("reduce_mean_axis1: need (B,T,E)");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    Tensor out({batch, e});
    for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t j = 0; j < e; ++j) {
            float acc = 0.0f;
            for (int64_t ti = 0; ti < tt; ++ti) acc += vx.at3(bi, ti, j);
            out.at2(bi, j) = acc / static_cast<float>(tt);
        }
    return push(std::move(out), [x, batch, tt, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        const float inv = 1.0f / static_cast<float>(tt);
        for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t ti = 0; ti < tt; ++ti)
                for (int64_t j = 0; j < e; ++j)
                    gx.at3(bi, ti, j) += self.grad.at2(bi, j) * inv;
    });
}

VarId Tape::sub_broadcast_rows(VarId x, VarId m) {
    const Tensor &vx = value(x);
    const Tensor &vm = value(m);
    if (vx.rank() != 3 || vm.rank() != 2 || vx.dim(0) != vm.dim(0) || vx.dim(2) != vm.dim(1))
        throw ShapeError("sub_broadcast_rows: shape mismatch");
    const int64_t batch = vx.dim(0), tt = vx.dim(1), e = vx.dim(2);
    Tensor out(vx.shape);
    for (int64_t bi = 0; bi < batch; ++bi)
        for (int64_t ti = 0; ti < tt; ++ti)
            for (int64_t j = 0; j < e; ++j)
                out.at3(bi, ti, j) = vx.at3(bi, ti, j) - vm.at2(bi, j);
    return push(std::move(out), [x, m, batch, tt, e](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        Tensor &gm = t.grad_of(m);
        for (int64_t bi = 0; bi < batch; ++bi)
            for (int64_t ti = 0; ti < tt; ++ti)
                for (int64_t j = 0; j < e; ++j) {
                    gx.at3(bi, ti, j) += self.grad.at3(bi, ti, j);
                    gm.at2(bi, j) -= self.grad.at3(bi, ti, j);
                }
    });
}

VarId Tape::wsum(VarId x, Tensor weights) {
    const Tensor &vx = value(x);
    if (vx.numel() != weights.numel()) throw ShapeError("wsum: weight size mismatch");
    double acc = 0.0;
    for (int64_t i = 0; i < vx.numel(); ++i)
        acc += static_cast<double>(vx.data[i]) * weights.data[i];
    Tensor out({1});
    out.data[0] = static_cast<float>(acc);
    auto w = std::make_shared<Tensor>(std::move(weights));
    return push(std::move(out), [x, w](Tape &t, Node &self) {
        Tensor &gx = t.grad_of(x);
        const float g = self.grad.data[0];
        for (int64_t i = 0; i < gx.numel(); ++i) gx.data[i] += g * w->data[i];
    });
}

VarId Tape::l2norm(VarId x) {
    const Tensor &vx = value(x);
    double acc = 0.0;
    for (float v : vx.data) acc += static_cast<double>(v) * v;
    Tensor out({1});
    out.data[0] = static_cast<float>(std::sqrt(acc));
    return push(std::move(out), [x](Tape &t, Node &self) {
        const float norm = self.value.data[0];
        if (norm <= 0.0f) return;
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        const float g = self.grad.data[0] / norm;
        for (int64_t i = 0; i < gx.numel(); ++i) gx.data[i] += g * vx.data[i];
    });
}

VarId Tape::l1norm(VarId x) {
    const Tensor &vx = value(x);
    double acc = 0.0;
    for (float v : vx.data) acc += std::fabs(static_cast<double>(v));
    Tensor out({1});
    out.data[0] = static_cast<float>(acc);
    return push(std::move(out), [x](Tape &t, Node &self) {
        const Tensor &vx = t.value(x);
        Tensor &gx = t.grad_of(x);
        const float g = self.grad.data[0];
        for (int64_t i = 0; i < gx.numel(); ++i) {
            if (vx.data[i] > 0.0f)
                gx.data[i] += g;
            else if (vx.data[i] < 0.0f)
                gx.data[i] -= g;
        }
    });
}

void Tape::backward(VarId loss) {
    if (value(loss).numel() != 1) throw ShapeError("backward: loss must be scalar");
    grad_of(loss).data[0] = 1.0f;
    for (int64_t i = static_cast<int64_t>(nodes_.size()) - 1; i >= 0; --i) {
        Node &n = nodes_[static_cast<size_t>(i)];
        if (n.grad.data.empty()) continue;
        if (n.backfn) n.backfn(*this, n);
        if (n.bound) {
            Tensor &pg = n.bound->grad;
            for (int64_t j = 0; j < n.grad.numel(); ++j) pg.data[j] += n.grad.data[j];
        }
    }
}

void sgd_step(const std::vector<Param *> &params, float lr) {
    for (Param *p : params)
        for (int64_t i = 0; i < p->value.numel(); ++i) p->value.data[i] -= lr * p->grad.data[i];
}

void adam_step(const std::vector<Param *> &params, float lr, int64_t t, float beta1, float beta2,
               float eps) {
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t));
    for (Param *p : params) {
        for (int64_t i = 0; i < p->value.numel(); ++i) {
            const float g = p->grad.data[i];
            float &m = p->adam_m.data[i];
            float &v = p->adam_v.data[i];
            m = beta1 * m + (1.0f - beta1) * g;
            v = beta2 * v + (1.0f - beta2) * g * g;
            const float mh = m / bc1;
            const float vh = v / bc2;
            p->value.data[i] -= lr * mh / (std::sqrt(vh) + eps);
        }
    }
}

void zero_grads(const std::vector<Param *> &params) {
    for (Param *p : params) p->zero_grad();
}

} // namespace datta
