#include "gradsplit/tape.hpp"

#include <algorithm>
#include <cmath>

namespace gradsplit {

void Tape::backward(const Tensor& root) {
    if (!root.defined() || root.numel() != 1) {
        throw ContractError("backward requires a scalar root, got " +
                            (root.defined() ? shape_to_string(root.shape()) : std::string("<undefined>")));
    }
    Tensor r = root;
    r.ensure_grad();
    r.grad()[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
        (*it)();
    }
}

namespace {

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shapes " + shape_to_string(a.shape()) +
                             " and " + shape_to_string(b.shape()) + " differ");
    }
}

std::int64_t last_dim(const Tensor& t) { return t.dim(t.rank() - 1); }

}  // namespace

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw DimensionError("matmul requires rank-2 tensors, got " + shape_to_string(a.shape()) +
                             " and " + shape_to_string(b.shape()));
    }
    const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
    if (k != k2) {
        throw DimensionError("matmul: inner dimensions of " + shape_to_string(a.shape()) +
                             " and " + shape_to_string(b.shape()) + " do not agree");
    }
    Tensor out = Tensor::zeros({m, n});
    {
        const double* pa = a.data();
        const double* pb = b.data();
        double* pc = out.data();
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t kk = 0; kk < k; ++kk) {
                const double aik = pa[i * k + kk];
                const double* brow = pb + kk * n;
                double* crow = pc + i * n;
                for (std::int64_t j = 0; j < n; ++j) crow[j] += aik * brow[j];
            }
        }
    }
    tape.record([a = a, b = b, out = out, m, k, n]() mutable {
        if (!out.has_grad()) return;
        a.ensure_grad();
        b.ensure_grad();
        const double* g = out.grad();
        const double* pa = a.data();
        const double* pb = b.data();
        double* ga = a.grad();
        double* gb = b.grad();
        // dA = G * B^T
        for (std::int64_t i = 0; i < m; ++i) {
            for (std::int64_t j = 0; j < n; ++j) {
                const double gij = g[i * n + j];
                const double* brow = pb;  // b[k][j] column walk
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    ga[i * k + kk] += gij * brow[kk * n + j];
                }
            }
        }
        // dB = A^T * G
        for (std::int64_t kk = 0; kk < k; ++kk) {
            for (std::int64_t i = 0; i < m; ++i) {
                const double aik = pa[i * k + kk];
                const double* grow = g + i * n;
                double* gbrow = gb + kk * n;
                for (std::int64_t j = 0; j < n; ++j) gbrow[j] += aik * grow[j];
            }
        }
    });
    return out;
}

Tensor conv2d(Tape& tape, const Tensor& input, const Tensor& kernel,
              std::int64_t stride, std::int64_t padding) {
    if (input.rank() != 4 || kernel.rank() != 4) {
        throw DimensionError("conv2d requires NCHW input and FCkhkw kernel, got " +
                             shape_to_string(input.shape()) + " and " + shape_to_string(kernel.shape()));
    }
    if (stride < 1) throw ConfigError("conv2d stride must be >= 1");
    if (padding < 0) throw ConfigError("conv2d padding must be >= 0");
    const std::int64_t n = input.dim(0), c = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::int64_t f = kernel.dim(0), kc = kernel.dim(1), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kc != c) {
        throw DimensionError("conv2d: kernel channels " + shape_to_string(kernel.shape()) +
                             " do not match input " + shape_to_string(input.shape()));
    }
    if (kh > h + 2 * padding || kw > w + 2 * padding) {
        throw DimensionError("conv2d: kernel " + shape_to_string(kernel.shape()) +
                             " larger than padded input " + shape_to_string(input.shape()));
    }
    const std::int64_t oh = (h + 2 * padding - kh) / stride + 1;
    const std::int64_t ow = (w + 2 * padding - kw) / stride + 1;
    Tensor out = Tensor::zeros({n, f, oh, ow});
    {
        const double* pin = input.data();
        const double* pk = kernel.data();
        double* po = out.data();
        for (std::int64_t in = 0; in < n; ++in) {
            for (std::int64_t of = 0; of < f; ++of) {
                for (std::int64_t y = 0; y < oh; ++y) {
                    for (std::int64_t x = 0; x < ow; ++x) {
                        double acc = 0.0;
                        for (std::int64_t ic = 0; ic < c; ++ic) {
                            const double* plane = pin + (in * c + ic) * h * w;
                            const double* kplane = pk + (of * c + ic) * kh * kw;
                            for (std::int64_t dy = 0; dy < kh; ++dy) {
                                const std::int64_t sy = y * stride + dy - padding;
                                if (sy < 0 || sy >= h) continue;
                                for (std::int64_t dx = 0; dx < kw; ++dx) {
                                    const std::int64_t sx = x * stride + dx - padding;
                                    if (sx < 0 || sx >= w) continue;
                                    acc += plane[sy * w + sx] * kplane[dy * kw + dx];
                                }
                            }
                        }
                        po[((in * f + of) * oh + y) * ow + x] = acc;
                    }
                }
            }
        }
    }
    tape.record([input = input, kernel = kernel, out = out, n, c, h, w, f, kh, kw, oh, ow, stride, padding]() mutable {
        if (!out.has_grad()) return;
        input.ensure_grad();
        kernel.ensure_grad();
        const double* g = out.grad();
        const double* pin = input.data();
        const double* pk = kernel.data();
        double* gin = input.grad();
        double* gk = kernel.grad();
        for (std::int64_t in = 0; in < n; ++in) {
            for (std::int64_t of = 0; of < f; ++of) {
                for (std::int64_t y = 0; y < oh; ++y) {
                    for (std::int64_t x = 0; x < ow; ++x) {
                        const double gv = g[((in * f + of) * oh + y) * ow + x];
                        if (gv == 0.0) continue;
                        for (std::int64_t ic = 0; ic < c; ++ic) {
                            const double* plane = pin + (in * c + ic) * h * w;
                            double* gplane = gin + (in * c + ic) * h * w;
                            const double* kplane = pk + (of * c + ic) * kh * kw;
                            double* gkplane = gk + (of * c + ic) * kh * kw;
                            for (std::int64_t dy = 0; dy < kh; ++dy) {
                                const std::int64_t sy = y * stride + dy - padding;
                                if (sy < 0 || sy >= h) continue;
                                for (std::int64_t dx = 0; dx < kw; ++dx) {
                                    const std::int64_t sx = x * stride + dx - padding;
                                    if (sx < 0 || sx >= w) continue;
                                    gplane[sy * w + sx] += gv * kplane[dy * kw + dx];
                                    gkplane[dy * kw + dx] += gv * plane[sy * w + sx];
                                }
                            }
                        }
                    }
                }
            }
        }
    });
    return out;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
    tape.record([a = a, b = b, out = out, n]() mutable {
        if (!out.has_grad()) return;
        a.ensure_grad();
        b.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            a.grad()[i] += g[i];
            b.grad()[i] += g[i];
        }
    });
    return out;
}

Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
    tape.record([a = a, b = b, out = out, n]() mutable {
        if (!out.has_grad()) return;
        a.ensure_grad();
        b.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            a.grad()[i] += g[i];
            b.grad()[i] -= g[i];
        }
    });
    return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
    tape.record([a = a, b = b, out = out, n]() mutable {
        if (!out.has_grad()) return;
        a.ensure_grad();
        b.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            a.grad()[i] += g[i] * b.data()[i];
            b.grad()[i] += g[i] * a.data()[i];
        }
    });
    return out;
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
    Tensor out = Tensor::zeros(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * factor;
    tape.record([a = a, out = out, n, factor]() mutable {
        if (!out.has_grad()) return;
        a.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) a.grad()[i] += g[i] * factor;
    });
    return out;
}

Tensor add_rowwise(Tape& tape, const Tensor& mat, const Tensor& bias) {
    if (mat.rank() != 2 || bias.rank() != 1 || bias.dim(0) != mat.dim(1)) {
        throw DimensionError("add_rowwise: shapes " + shape_to_string(mat.shape()) + " and " +
                             shape_to_string(bias.shape()) + " are incompatible");
    }
    const std::int64_t n = mat.dim(0), c = mat.dim(1);
    Tensor out = Tensor::zeros(mat.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t j = 0; j < c; ++j) {
            out.data()[i * c + j] = mat.data()[i * c + j] + bias.data()[j];
        }
    }
    tape.record([mat = mat, bias = bias, out = out, n, c]() mutable {
        if (!out.has_grad()) return;
        mat.ensure_grad();
        bias.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t j = 0; j < c; ++j) {
                mat.grad()[i * c + j] += g[i * c + j];
                bias.grad()[j] += g[i * c + j];
            }
        }
    });
    return out;
}

Tensor add_channel_bias(Tape& tape, const Tensor& input, const Tensor& bias) {
    if (input.rank() != 4 || bias.rank() != 1 || bias.dim(0) != input.dim(1)) {
        throw DimensionError("add_channel_bias: shapes " + shape_to_string(input.shape()) + " and " +
                             shape_to_string(bias.shape()) + " are incompatible");
    }
    const std::int64_t n = input.dim(0), c = input.dim(1);
    const std::int64_t plane = input.dim(2) * input.dim(3);
    Tensor out = Tensor::zeros(input.shape());
    for (std::int64_t i = 0; i < n; ++i) {
        for (std::int64_t ch = 0; ch < c; ++ch) {
            const double b = bias.data()[ch];
            const double* src = input.data() + (i * c + ch) * plane;
            double* dst = out.data() + (i * c + ch) * plane;
            for (std::int64_t p = 0; p < plane; ++p) dst[p] = src[p] + b;
        }
    }
    tape.record([input = input, bias = bias, out = out, n, c, plane]() mutable {
        if (!out.has_grad()) return;
        input.ensure_grad();
        bias.ensure_grad();
        for (std::int64_t i = 0; i < n; ++i) {
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const double* g = out.grad() + (i * c + ch) * plane;
                double* gi = input.grad() + (i * c + ch) * plane;
                double acc = 0.0;
                for (std::int64_t p = 0; p < plane; ++p) {
                    gi[p] += g[p];
                    acc += g[p];
                }
                bias.grad()[ch] += acc;
            }
        }
    });
    return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
    tape.record([x = x, out = out, n]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            if (x.data()[i] > 0.0) x.grad()[i] += g[i];  // subgradient 0 at the kink
        }
    });
    return out;
}

Tensor tanh_act(Tape& tape, const Tensor& x) {
    Tensor out = Tensor::zeros(x.shape());
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
    tape.record([x = x, out = out, n]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) {
            const double t = out.data()[i];
            x.grad()[i] += (1.0 - t * t) * g[i];
        }
    });
    return out;
}

Tensor softmax(Tape& tape, const Tensor& x) {
    const std::int64_t c = last_dim(x);
    const std::int64_t rows = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.data() + r * c;
        double* orow = out.data() + r * c;
        double mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < c; ++j) {
            orow[j] = std::exp(row[j] - mx);
            denom += orow[j];
        }
        for (std::int64_t j = 0; j < c; ++j) orow[j] /= denom;
    }
    tape.record([x = x, out = out, rows, c]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* y = out.data() + r * c;
            const double* g = out.grad() + r * c;
            double* gx = x.grad() + r * c;
            double dot = 0.0;
            for (std::int64_t j = 0; j < c; ++j) dot += g[j] * y[j];
            for (std::int64_t j = 0; j < c; ++j) gx[j] += y[j] * (g[j] - dot);
        }
    });
    return out;
}

Tensor log_softmax(Tape& tape, const Tensor& x) {
    const std::int64_t c = last_dim(x);
    const std::int64_t rows = x.numel() / c;
    Tensor out = Tensor::zeros(x.shape());
    for (std::int64_t r = 0; r < rows; ++r) {
        const double* row = x.data() + r * c;
        double* orow = out.data() + r * c;
        double mx = row[0];
        for (std::int64_t j = 1; j < c; ++j) mx = std::max(mx, row[j]);
        double denom = 0.0;
        for (std::int64_t j = 0; j < c; ++j) denom += std::exp(row[j] - mx);
        const double log_denom = mx + std::log(denom);
        for (std::int64_t j = 0; j < c; ++j) orow[j] = row[j] - log_denom;
    }
    tape.record([x = x, out = out, rows, c]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        for (std::int64_t r = 0; r < rows; ++r) {
            const double* ls = out.data() + r * c;
            const double* g = out.grad() + r * c;
            double* gx = x.grad() + r * c;
            double gsum = 0.0;
            for (std::int64_t j = 0; j < c; ++j) gsum += g[j];
            for (std::int64_t j = 0; j < c; ++j) gx[j] += g[j] - std::exp(ls[j]) * gsum;
        }
    });
    return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
    if (shape_numel(new_shape) != x.numel()) {
        throw DimensionError("reshape: cannot view " + shape_to_string(x.shape()) + " as " +
                             shape_to_string(new_shape));
    }
    Tensor out = Tensor::from_data(std::move(new_shape),
                                   std::vector<double>(x.data(), x.data() + x.numel()));
    const std::int64_t n = x.numel();
    tape.record([x = x, out = out, n]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        const double* g = out.grad();
        for (std::int64_t i = 0; i < n; ++i) x.grad()[i] += g[i];
    });
    return out;
}

Tensor sum(Tape& tape, const Tensor& x) {
    double acc = 0.0;
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc);
    tape.record([x = x, out = out, n]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        const double g = out.grad()[0];
        for (std::int64_t i = 0; i < n; ++i) x.grad()[i] += g;
    });
    return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
    double acc = 0.0;
    const std::int64_t n = x.numel();
    for (std::int64_t i = 0; i < n; ++i) acc += x.data()[i];
    Tensor out = Tensor::scalar(acc / static_cast<double>(n));
    tape.record([x = x, out = out, n]() mutable {
        if (!out.has_grad()) return;
        x.ensure_grad();
        const double g = out.grad()[0] / static_cast<double>(n);
        for (std::int64_t i = 0; i < n; ++i) x.grad()[i] += g;
    });
    return out;
}

}  // namespace gradsplit
