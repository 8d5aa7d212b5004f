#include "ftlab/tape.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "ftlab/kernels.hpp"

namespace ftlab {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_dims(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
    }
}

void require_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2) throw ShapeError(std::string(op) + ": expected rank-2 tensor, got " + t.shape_str());
}

struct AxisSplit {
    int64_t outer;
    int len;
    int64_t inner;
};

AxisSplit split_axis(const Tensor& t, int axis, const char* op) {
    if (axis < 0 || axis >= t.rank()) {
        throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for " + t.shape_str());
    }
    AxisSplit s{1, t.dim(axis), 1};
    for (int i = 0; i < axis; ++i) s.outer *= t.dim(i);
    for (int i = axis + 1; i < t.rank(); ++i) s.inner *= t.dim(i);
    return s;
}

}  // namespace

Tape::NodeId Tape::check(NodeId id) const {
    if (id < 0 || static_cast<size_t>(id) >= nodes_.size()) {
        throw ContractError("tape node id " + std::to_string(id) + " out of range");
    }
    return id;
}

Tape::NodeId Tape::push(Tensor value, std::vector<NodeId> inputs, std::function<void(Tape&, NodeId)> bw) {
    for (NodeId in : inputs) check(in);
    Node n;
    n.grad.assign(static_cast<size_t>(value.size()), 0.0);
    n.value = std::move(value);
    n.inputs = std::move(inputs);
    n.backward = std::move(bw);
    nodes_.push_back(std::move(n));
    return static_cast<NodeId>(nodes_.size() - 1);
}

Tape::NodeId Tape::leaf(Tensor value) { return push(std::move(value), {}, nullptr); }
Tape::NodeId Tape::constant(Tensor value) { return push(std::move(value), {}, nullptr); }

Tensor Tape::grad_tensor(NodeId id) const {
    const Node& n = nodes_[check(id)];
    return Tensor(n.value.dims(), n.grad);
}

void Tape::backward(NodeId loss) {
    check(loss);
    if (nodes_[loss].value.size() != 1) {
        throw ContractError("backward requires a scalar loss, got " + nodes_[loss].value.shape_str());
    }
    nodes_[loss].grad[0] = 1.0;
    for (NodeId id = loss; id >= 0; --id) {
        if (nodes_[id].backward) nodes_[id].backward(*this, id);
    }
}

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "add");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Tensor out(va.dims());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] + vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        auto gb = t.grad_mut(b);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] += g[i];
        }
    });
}

Tape::NodeId Tape::sub(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "sub");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Tensor out(va.dims());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] - vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        auto gb = t.grad_mut(b);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i];
            gb[i] -= g[i];
        }
    });
}

Tape::NodeId Tape::mul(NodeId a, NodeId b) {
    require_same_shape(value(a), value(b), "mul");
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    Tensor out(va.dims());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] * vb[i];
    return push(std::move(out), {a, b}, [a, b](Tape& t, NodeId self) {
        auto g = t.grad(self);
        const Tensor& xa = t.value(a);
        const Tensor& xb = t.value(b);
        auto ga = t.grad_mut(a);
        auto gb = t.grad_mut(b);
        for (size_t i = 0; i < g.size(); ++i) {
            ga[i] += g[i] * xb[static_cast<int64_t>(i)];
            gb[i] += g[i] * xa[static_cast<int64_t>(i)];
        }
    });
}

Tape::NodeId Tape::add_scalar(NodeId a, double s) {
    const Tensor& va = value(a);
    Tensor out(va.dims());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] + s;
    return push(std::move(out), {a}, [a](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
}

Tape::NodeId Tape::scale(NodeId a, double s) {
    const Tensor& va = value(a);
    Tensor out(va.dims());
    for (int64_t i = 0; i < va.size(); ++i) out[i] = va[i] * s;
    return push(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        for (size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * s;
    });
}

Tape::NodeId Tape::tanh(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.dims());
    kernels::tanh_forward(va.size(), va.data(), out.data());
    return push(std::move(out), {a}, [a](Tape& t, NodeId self) {
        const Tensor& y = t.value(self);
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        kernels::tanh_backward_acc(y.size(), y.data(), g.data(), ga.data());
    });
}

Tape::NodeId Tape::gelu(NodeId a) {
    const Tensor& va = value(a);
    Tensor out(va.dims());
    kernels::gelu_forward(va.size(), va.data(), out.data());
    return push(std::move(out), {a}, [a](Tape& t, NodeId self) {
        const Tensor& x = t.value(a);
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        kernels::gelu_backward_acc(x.size(), x.data(), g.data(), ga.data());
    });
}

// ---------------------------------------------------------------------------
// linear algebra
// ---------------------------------------------------------------------------

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_rank2(va, "matmul");
    require_rank2(vb, "matmul");
    if (va.dim(1) != vb.dim(0)) {
        throw ShapeError("matmul: inner dimensions differ, " + va.shape_str() + " vs " + vb.shape_str());
    }
    const int m = va.dim(0), k = va.dim(1), n = vb.dim(1);
    Tensor out({m, n});
    kernels::gemm_nn(m, n, k, va.data(), vb.data(), out.data());
    return push(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        // dA += dC * B^T ; dB += A^T * dC
        kernels::gemm_nt_acc(m, k, n, g.data(), t.value(b).data(), t.grad_mut(a).data());
        kernels::gemm_tn_acc(k, n, m, t.value(a).data(), g.data(), t.grad_mut(b).data());
    });
}

Tape::NodeId Tape::matmul_nt(NodeId a, NodeId b) {
    const Tensor& va = value(a);
    const Tensor& vb = value(b);
    require_rank2(va, "matmul_nt");
    require_rank2(vb, "matmul_nt");
    if (va.dim(1) != vb.dim(1)) {
        throw ShapeError("matmul_nt: inner dimensions differ, " + va.shape_str() + " vs " + vb.shape_str());
    }
    const int m = va.dim(0), k = va.dim(1), n = vb.dim(0);
    Tensor out({m, n});
    kernels::gemm_nt(m, n, k, va.data(), vb.data(), out.data());
    return push(std::move(out), {a, b}, [a, b, m, k, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        // C = A*B^T: dA += dC * B ; dB += dC^T * A
        kernels::gemm_nn_acc(m, k, n, g.data(), t.value(b).data(), t.grad_mut(a).data());
        kernels::gemm_tn_acc(n, k, m, g.data(), t.value(a).data(), t.grad_mut(b).data());
    });
}

Tape::NodeId Tape::affine(NodeId x, NodeId w, NodeId b) {
    const Tensor& vx = value(x);
    const Tensor& vw = value(w);
    const Tensor& vb = value(b);
    require_rank2(vx, "affine");
    require_rank2(vw, "affine");
    if (vb.rank() != 1) throw ShapeError("affine: bias must be rank-1, got " + vb.shape_str());
    if (vx.dim(1) != vw.dim(0)) {
        throw ShapeError("affine: input dim " + vx.shape_str() + " does not match weight " + vw.shape_str());
    }
    if (vw.dim(1) != vb.dim(0)) {
        throw ShapeError("affine: weight " + vw.shape_str() + " does not match bias " + vb.shape_str());
    }
    const int m = vx.dim(0), k = vx.dim(1), n = vw.dim(1);
    Tensor out({m, n});
    kernels::gemm_nn(m, n, k, vx.data(), vw.data(), out.data());
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) += vb[j];
    }
    return push(std::move(out), {x, w, b}, [x, w, b, m, k, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        kernels::gemm_nt_acc(m, k, n, g.data(), t.value(w).data(), t.grad_mut(x).data());
        kernels::gemm_tn_acc(k, n, m, t.value(x).data(), g.data(), t.grad_mut(w).data());
        auto gb = t.grad_mut(b);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < n; ++j) gb[j] += g[static_cast<size_t>(i) * n + j];
        }
    });
}

// ---------------------------------------------------------------------------
// softmax family / normalization
// ---------------------------------------------------------------------------

Tape::NodeId Tape::softmax(NodeId a, int axis) {
    const Tensor& va = value(a);
    const AxisSplit s = split_axis(va, axis, "softmax");
    Tensor out(va.dims());
    if (s.inner == 1) {
        kernels::softmax_rows(s.outer, s.len, va.data(), out.data());
    } else {
        for (int64_t o = 0; o < s.outer; ++o) {
            for (int64_t in = 0; in < s.inner; ++in) {
                const int64_t base = o * s.len * s.inner + in;
                double mx = va[base];
                for (int l = 1; l < s.len; ++l) mx = std::max(mx, va[base + l * s.inner]);
                double sum = 0.0;
                for (int l = 0; l < s.len; ++l) {
                    const double e = std::exp(va[base + l * s.inner] - mx);
                    out[base + l * s.inner] = e;
                    sum += e;
                }
                const double inv = 1.0 / sum;
                for (int l = 0; l < s.len; ++l) out[base + l * s.inner] *= inv;
            }
        }
    }
    return push(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
        const Tensor& y = t.value(self);
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        // dx = y (*) (dy - <dy, y>) per slice
        for (int64_t o = 0; o < s.outer; ++o) {
            for (int64_t in = 0; in < s.inner; ++in) {
                const int64_t base = o * s.len * s.inner + in;
                double dot = 0.0;
                for (int l = 0; l < s.len; ++l) {
                    const int64_t idx = base + l * s.inner;
                    dot += g[static_cast<size_t>(idx)] * y[idx];
                }
                for (int l = 0; l < s.len; ++l) {
                    const int64_t idx = base + l * s.inner;
                    ga[static_cast<size_t>(idx)] += y[idx] * (g[static_cast<size_t>(idx)] - dot);
                }
            }
        }
    });
}

Tape::NodeId Tape::log_softmax(NodeId a, int axis) {
    const Tensor& va = value(a);
    const AxisSplit s = split_axis(va, axis, "log_softmax");
    Tensor out(va.dims());
    for (int64_t o = 0; o < s.outer; ++o) {
        for (int64_t in = 0; in < s.inner; ++in) {
            const int64_t base = o * s.len * s.inner + in;
            double mx = va[base];
            for (int l = 1; l < s.len; ++l) mx = std::max(mx, va[base + l * s.inner]);
            double sum = 0.0;
            for (int l = 0; l < s.len; ++l) sum += std::exp(va[base + l * s.inner] - mx);
            const double lse = mx + std::log(sum);
            for (int l = 0; l < s.len; ++l) {
                const int64_t idx = base + l * s.inner;
                out[idx] = va[idx] - lse;
            }
        }
    }
    return push(std::move(out), {a}, [a, s](Tape& t, NodeId self) {
        const Tensor& y = t.value(self);
        auto g = t.grad(self);
        auto ga = t.grad_mut(a);
        // dx = dy - exp(y) * sum(dy) per slice
        for (int64_t o = 0; o < s.outer; ++o) {
            for (int64_t in = 0; in < s.inner; ++in) {
                const int64_t base = o * s.len * s.inner + in;
                double gsum = 0.0;
                for (int l = 0; l < s.len; ++l) gsum += g[static_cast<size_t>(base + l * s.inner)];
                for (int l = 0; l < s.len; ++l) {
                    const int64_t idx = base + l * s.inner;
                    ga[static_cast<size_t>(idx)] += g[static_cast<size_t>(idx)] - std::exp(y[idx]) * gsum;
                }
            }
        }
    });
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
    const Tensor& vx = value(x);
    const Tensor& vg = value(gain);
    const Tensor& vb = value(bias);
    if (vg.rank() != 1 || vb.rank() != 1) {
        throw ShapeError("layer_norm: gain/bias must be rank-1");
    }
    const int h = vx.dim(vx.rank() - 1);
    if (vg.dim(0) != h || vb.dim(0) != h) {
        throw ShapeError("layer_norm: last dim " + std::to_string(h) + " does not match gain " + vg.shape_str() +
                         " / bias " + vb.shape_str());
    }
    const int64_t rows = vx.size() / h;
    Tensor out(vx.dims());
    // saved for backward
    std::vector<double> xhat(static_cast<size_t>(vx.size()));
    std::vector<double> rstd(static_cast<size_t>(rows));
    for (int64_t r = 0; r < rows; ++r) {
        const double* xr = vx.data() + r * h;
        double mu = 0.0;
        for (int j = 0; j < h; ++j) mu += xr[j];
        mu /= h;
        double var = 0.0;
        for (int j = 0; j < h; ++j) {
            const double d = xr[j] - mu;
            var += d * d;
        }
        var /= h;
        const double rs = 1.0 / std::sqrt(var + eps);
        rstd[static_cast<size_t>(r)] = rs;
        for (int j = 0; j < h; ++j) {
            const double xh = (xr[j] - mu) * rs;
            xhat[static_cast<size_t>(r * h + j)] = xh;
            out[r * h + j] = xh * vg[j] + vb[j];
        }
    }
    return push(std::move(out), {x, gain, bias},
                [x, gain, bias, h, rows, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& t, NodeId self) {
                    auto g = t.grad(self);
                    const Tensor& vg2 = t.value(gain);
                    auto gx = t.grad_mut(x);
                    auto gg = t.grad_mut(gain);
                    auto gb = t.grad_mut(bias);
                    for (int64_t r = 0; r < rows; ++r) {
                        const size_t base = static_cast<size_t>(r) * h;
                        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                        for (int j = 0; j < h; ++j) {
                            const double dy = g[base + j];
                            const double dxh = dy * vg2[j];
                            mean_dxhat += dxh;
                            mean_dxhat_xhat += dxh * xhat[base + j];
                            gg[static_cast<size_t>(j)] += dy * xhat[base + j];
                            gb[static_cast<size_t>(j)] += dy;
                        }
                        mean_dxhat /= h;
                        mean_dxhat_xhat /= h;
                        const double rs = rstd[static_cast<size_t>(r)];
                        for (int j = 0; j < h; ++j) {
                            const double dxh = g[base + j] * vg2[j];
                            gx[base + j] += rs * (dxh - mean_dxhat - xhat[base + j] * mean_dxhat_xhat);
                        }
                    }
                });
}

Tape::NodeId Tape::mask_shift(NodeId x, Tensor scale_t, Tensor shift_t) {
    const Tensor& vx = value(x);
    require_same_shape(vx, scale_t, "mask_shift");
    require_same_shape(vx, shift_t, "mask_shift");
    Tensor out(vx.dims());
    for (int64_t i = 0; i < vx.size(); ++i) out[i] = vx[i] * scale_t[i] + shift_t[i];
    return push(std::move(out), {x}, [x, scale_t = std::move(scale_t)](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto gx = t.grad_mut(x);
        for (size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * scale_t[static_cast<int64_t>(i)];
    });
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

Tape::NodeId Tape::slice_cols(NodeId x, int start, int count) {
    const Tensor& vx = value(x);
    require_rank2(vx, "slice_cols");
    const int m = vx.dim(0), n = vx.dim(1);
    if (start < 0 || count <= 0 || start + count > n) {
        throw ShapeError("slice_cols: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of bounds for " + vx.shape_str());
    }
    Tensor out({m, count});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < count; ++j) out.at(i, j) = vx.at(i, start + j);
    }
    return push(std::move(out), {x}, [x, start, count, m, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto gx = t.grad_mut(x);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < count; ++j) {
                gx[static_cast<size_t>(i) * n + start + j] += g[static_cast<size_t>(i) * count + j];
            }
        }
    });
}

Tape::NodeId Tape::slice_rows(NodeId x, int start, int count) {
    const Tensor& vx = value(x);
    require_rank2(vx, "slice_rows");
    const int m = vx.dim(0), n = vx.dim(1);
    if (start < 0 || count <= 0 || start + count > m) {
        throw ShapeError("slice_rows: range [" + std::to_string(start) + ", " + std::to_string(start + count) +
                         ") out of bounds for " + vx.shape_str());
    }
    Tensor out({count, n});
    for (int i = 0; i < count; ++i) {
        for (int j = 0; j < n; ++j) out.at(i, j) = vx.at(start + i, j);
    }
    return push(std::move(out), {x}, [x, start, count, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto gx = t.grad_mut(x);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < n; ++j) {
                gx[static_cast<size_t>(start + i) * n + j] += g[static_cast<size_t>(i) * n + j];
            }
        }
    });
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ShapeError("concat_cols: no inputs");
    const int m = value(xs[0]).dim(0);
    int total = 0;
    std::vector<int> widths;
    for (NodeId id : xs) {
        const Tensor& v = value(id);
        require_rank2(v, "concat_cols");
        if (v.dim(0) != m) throw ShapeError("concat_cols: row count mismatch");
        widths.push_back(v.dim(1));
        total += v.dim(1);
    }
    Tensor out({m, total});
    int off = 0;
    for (size_t t = 0; t < xs.size(); ++t) {
        const Tensor& v = value(xs[t]);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < widths[t]; ++j) out.at(i, off + j) = v.at(i, j);
        }
        off += widths[t];
    }
    return push(std::move(out), xs, [xs, widths, m, total](Tape& t, NodeId self) {
        auto g = t.grad(self);
        int off2 = 0;
        for (size_t q = 0; q < xs.size(); ++q) {
            auto gx = t.grad_mut(xs[q]);
            for (int i = 0; i < m; ++i) {
                for (int j = 0; j < widths[q]; ++j) {
                    gx[static_cast<size_t>(i) * widths[q] + j] += g[static_cast<size_t>(i) * total + off2 + j];
                }
            }
            off2 += widths[q];
        }
    });
}

Tape::NodeId Tape::concat_rows(const std::vector<NodeId>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: no inputs");
    const int n = value(xs[0]).dim(1);
    int total = 0;
    std::vector<int> heights;
    for (NodeId id : xs) {
        const Tensor& v = value(id);
        require_rank2(v, "concat_rows");
        if (v.dim(1) != n) throw ShapeError("concat_rows: column count mismatch");
        heights.push_back(v.dim(0));
        total += v.dim(0);
    }
    Tensor out({total, n});
    int off = 0;
    for (size_t t = 0; t < xs.size(); ++t) {
        const Tensor& v = value(xs[t]);
        for (int i = 0; i < heights[t]; ++i) {
            for (int j = 0; j < n; ++j) out.at(off + i, j) = v.at(i, j);
        }
        off += heights[t];
    }
    return push(std::move(out), xs, [xs, heights, n](Tape& t, NodeId self) {
        auto g = t.grad(self);
        int off2 = 0;
        for (size_t q = 0; q < xs.size(); ++q) {
            auto gx = t.grad_mut(xs[q]);
            for (int i = 0; i < heights[q]; ++i) {
                for (int j = 0; j < n; ++j) {
                    gx[static_cast<size_t>(i) * n + j] += g[static_cast<size_t>(off2 + i) * n + j];
                }
            }
            off2 += heights[q];
        }
    });
}

Tape::NodeId Tape::gather_rows(NodeId table, std::vector<int> rows) {
    const Tensor& vt = value(table);
    require_rank2(vt, "gather_rows");
    const int v = vt.dim(0), h = vt.dim(1);
    for (int r : rows) {
        if (r < 0 || r >= v) {
            throw ShapeError("gather_rows: row " + std::to_string(r) + " out of range for " + vt.shape_str());
        }
    }
    const int m = static_cast<int>(rows.size());
    Tensor out({m, h});
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < h; ++j) out.at(i, j) = vt.at(rows[static_cast<size_t>(i)], j);
    }
    return push(std::move(out), {table}, [table, rows = std::move(rows), h](Tape& t, NodeId self) {
        auto g = t.grad(self);
        auto gt = t.grad_mut(table);
        for (size_t i = 0; i < rows.size(); ++i) {
            for (int j = 0; j < h; ++j) {
                gt[static_cast<size_t>(rows[i]) * h + j] += g[i * h + j];
            }
        }
    });
}

// ---------------------------------------------------------------------------
// reductions and losses
// ---------------------------------------------------------------------------

Tape::NodeId Tape::sum(NodeId a) {
    const Tensor& va = value(a);
    double s = 0.0;
    for (int64_t i = 0; i < va.size(); ++i) s += va[i];
    return push(Tensor::scalar(s), {a}, [a](Tape& t, NodeId self) {
        const double g = t.grad(self)[0];
        auto ga = t.grad_mut(a);
        for (double& x : ga) x += g;
    });
}

Tape::NodeId Tape::mean(NodeId a) {
    const Tensor& va = value(a);
    double s = 0.0;
    for (int64_t i = 0; i < va.size(); ++i) s += va[i];
    const double inv = 1.0 / static_cast<double>(va.size());
    return push(Tensor::scalar(s * inv), {a}, [a, inv](Tape& t, NodeId self) {
        const double g = t.grad(self)[0] * inv;
        auto ga = t.grad_mut(a);
        for (double& x : ga) x += g;
    });
}

Tape::NodeId Tape::weighted_cross_entropy(NodeId logits, std::vector<int> targets, std::vector<double> class_weights,
                                          LossReduction red) {
    const Tensor& vl = value(logits);
    require_rank2(vl, "weighted_cross_entropy");
    const int b = vl.dim(0), c = vl.dim(1);
    if (static_cast<int>(targets.size()) != b) {
        throw ShapeError("weighted_cross_entropy: " + std::to_string(targets.size()) + " targets for batch " +
                         std::to_string(b));
    }
    if (static_cast<int>(class_weights.size()) != c) {
        throw ShapeError("weighted_cross_entropy: " + std::to_string(class_weights.size()) + " weights for " +
                         std::to_string(c) + " classes");
    }
    for (int i = 0; i < b; ++i) {
        if (targets[static_cast<size_t>(i)] < 0 || targets[static_cast<size_t>(i)] >= c) {
            throw DataError("weighted_cross_entropy: target " + std::to_string(targets[static_cast<size_t>(i)]) +
                            " out of range for sample " + std::to_string(i));
        }
    }
    for (double w : class_weights) {
        if (!(w > 0.0)) throw ContractError("weighted_cross_entropy: class weights must be positive");
    }
    // log-softmax per row, probabilities saved for backward
    std::vector<double> probs(static_cast<size_t>(vl.size()));
    kernels::softmax_rows(b, c, vl.data(), probs.data());
    double num = 0.0, wsum = 0.0;
    for (int i = 0; i < b; ++i) {
        const double* row = vl.data() + static_cast<size_t>(i) * c;
        double mx = row[0];
        for (int j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double se = 0.0;
        for (int j = 0; j < c; ++j) se += std::exp(row[j] - mx);
        const int tgt = targets[static_cast<size_t>(i)];
        const double log_p = row[tgt] - mx - std::log(se);
        num += -class_weights[static_cast<size_t>(tgt)] * log_p;
        wsum += class_weights[static_cast<size_t>(tgt)];
    }
    const double denom = red == LossReduction::weighted_mean ? wsum : static_cast<double>(b);
    return push(Tensor::scalar(num / denom), {logits},
                [logits, targets = std::move(targets), class_weights = std::move(class_weights), probs = std::move(probs),
                 denom, b, c](Tape& t, NodeId self) {
                    const double g = t.grad(self)[0] / denom;
                    auto gl = t.grad_mut(logits);
                    for (int i = 0; i < b; ++i) {
                        const int tgt = targets[static_cast<size_t>(i)];
                        const double w = class_weights[static_cast<size_t>(tgt)];
                        for (int j = 0; j < c; ++j) {
                            const size_t idx = static_cast<size_t>(i) * c + j;
                            const double y = j == tgt ? 1.0 : 0.0;
                            gl[idx] += g * w * (probs[idx] - y);
                        }
                    }
                });
}

Tape::NodeId Tape::custom(std::vector<NodeId> inputs, Tensor value, std::function<void(Tape&, NodeId)> backward) {
    return push(std::move(value), std::move(inputs), std::move(backward));
}

}  // namespace ftlab
