#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>

#include "se3/autodiff.hpp"
#include "se3/error.hpp"

namespace se3 {

namespace {

using MatMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

ConstMatMap as_matrix(const Tensor& t, std::size_t rows, std::size_t cols) {
    return ConstMatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}
MatMap as_matrix(Tensor& t, std::size_t rows, std::size_t cols) {
    return MatMap(t.data.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

[[noreturn]] void shape_error(const char* op, const std::string& what) {
    throw ArgumentError(std::string(op) + ": " + what);
}

void require_rank(const char* op, const Tensor& t, std::size_t rank) {
    if (t.rank() != rank) shape_error(op, "expected rank " + std::to_string(rank) + ", got " + shape_string(t.shape));
}

void require_same(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape) shape_error(op, shape_string(a.shape) + " vs " + shape_string(b.shape));
}

void check_index(const char* op, const IndexList& idx, std::size_t rows, std::size_t bound) {
    if (!idx || idx->size() != rows) shape_error(op, "index list length does not match rows");
    for (std::size_t i : *idx) {
        if (i >= bound) shape_error(op, "index " + std::to_string(i) + " out of range " + std::to_string(bound));
    }
}

Tape& tape_of(Var v) {
    if (v.tape == nullptr) throw ArgumentError("autodiff: detached Var");
    return *v.tape;
}

}  // namespace

Var linear(Var x, Var w, Var b) {
    const Tensor& X = x.value();
    const Tensor& W = w.value();
    const Tensor& B = b.value();
    require_rank("linear", W, 2);
    const std::size_t out = W.dim(0), in = W.dim(1);
    if (X.rank() == 0 || X.shape.back() != in) shape_error("linear", "input " + shape_string(X.shape) + " vs weight " + shape_string(W.shape));
    if (B.shape != Shape{out}) shape_error("linear", "bias " + shape_string(B.shape));
    const std::size_t rows = X.size() / in;
    Shape shape = X.shape;
    shape.back() = out;
    Tensor y(shape);
    auto Y = as_matrix(y, rows, out);
    Y.noalias() = as_matrix(X, rows, in) * as_matrix(W, out, in).transpose();
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(B.data.data(), static_cast<Eigen::Index>(out));
    return tape_of(x).record("linear", std::move(y), {x, w, b},
        [X, W, rows, in, out](const Tensor& g, std::span<Tensor* const> gi) {
            const auto G = as_matrix(g, rows, out);
            if (gi[0]) as_matrix(*gi[0], rows, in).noalias() += G * as_matrix(W, out, in);
            if (gi[1]) as_matrix(*gi[1], out, in).noalias() += G.transpose() * as_matrix(X, rows, in);
            if (gi[2]) {
                Eigen::Map<Eigen::RowVectorXd>(gi[2]->data.data(), static_cast<Eigen::Index>(out)) += G.colwise().sum();
            }
        });
}

Var layer_norm(Var x, Var gamma, Var beta, double eps) {
    const Tensor& X = x.value();
    if (X.rank() == 0) shape_error("layer_norm", "scalar input");
    const std::size_t f = X.shape.back();
    if (gamma.shape() != Shape{f} || beta.shape() != Shape{f}) shape_error("layer_norm", "affine width mismatch");
    const std::size_t rows = X.size() / f;
    const Tensor& gm = gamma.value();
    const Tensor& bt = beta.value();
    Tensor xhat(X.shape);
    std::vector<double> inv(rows);
    Tensor y(X.shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = X.data.data() + r * f;
        double mean = 0.0;
        for (std::size_t c = 0; c < f; ++c) mean += xr[c];
        mean /= static_cast<double>(f);
        double var = 0.0;
        for (std::size_t c = 0; c < f; ++c) var += (xr[c] - mean) * (xr[c] - mean);
        var /= static_cast<double>(f);
        inv[r] = 1.0 / std::sqrt(var + eps);
        for (std::size_t c = 0; c < f; ++c) {
            const double h = (xr[c] - mean) * inv[r];
            xhat[r * f + c] = h;
            y[r * f + c] = h * gm[c] + bt[c];
        }
    }
    return tape_of(x).record("layer_norm", std::move(y), {x, gamma, beta},
        [xhat = std::move(xhat), inv = std::move(inv), gm, rows, f](const Tensor& g, std::span<Tensor* const> gi) {
            std::vector<double> dh(f);
            for (std::size_t r = 0; r < rows; ++r) {
                double s1 = 0.0, s2 = 0.0;
                for (std::size_t c = 0; c < f; ++c) {
                    const double gv = g[r * f + c];
                    if (gi[1]) (*gi[1])[c] += gv * xhat[r * f + c];
                    if (gi[2]) (*gi[2])[c] += gv;
                    dh[c] = gv * gm[c];
                    s1 += dh[c];
                    s2 += dh[c] * xhat[r * f + c];
                }
                if (!gi[0]) continue;
                const double n = static_cast<double>(f);
                for (std::size_t c = 0; c < f; ++c) {
                    (*gi[0])[r * f + c] += inv[r] / n * (n * dh[c] - s1 - xhat[r * f + c] * s2);
                }
            }
        });
}

Var relu(Var x) {
    Tensor y = x.value();
    for (double& v : y.data) v = v > 0.0 ? v : 0.0;
    return tape_of(x).record("relu", y, {x}, [y](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (y[i] > 0.0) (*gi[0])[i] += g[i];
        }
    });
}

Var add(Var a, Var b) {
    require_same("add", a.value(), b.value());
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
    return tape_of(a).record("add", std::move(y), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
        for (int s = 0; s < 2; ++s) {
            if (!gi[s]) continue;
            for (std::size_t i = 0; i < g.size(); ++i) (*gi[s])[i] += g[i];
        }
    });
}

Var sub(Var a, Var b) {
    require_same("sub", a.value(), b.value());
    Tensor y = a.value();
    for (std::size_t i = 0; i < y.size(); ++i) y[i] -= b.value()[i];
    return tape_of(a).record("sub", std::move(y), {a, b}, [](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
        if (gi[1]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i];
    });
}

Var mul(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_same("mul", A, B);
    Tensor y = A;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] *= B[i];
    return tape_of(a).record("mul", std::move(y), {a, b}, [A, B](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] * B[i];
        if (gi[1]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] += g[i] * A[i];
    });
}

Var div(Var a, Var b) {
    const Tensor& A = a.value();
    const Tensor& B = b.value();
    require_same("div", A, B);
    Tensor y = A;
    for (std::size_t i = 0; i < y.size(); ++i) y[i] /= B[i];
    return tape_of(a).record("div", y, {a, b}, [y, B](const Tensor& g, std::span<Tensor* const> gi) {
        if (gi[0]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i] / B[i];
        if (gi[1]) for (std::size_t i = 0; i < g.size(); ++i) (*gi[1])[i] -= g[i] * y[i] / B[i];
    });
}

Var scale(Var x, double c) {
    Tensor y = x.value();
    for (double& v : y.data) v *= c;
    return tape_of(x).record("scale", std::move(y), {x}, [c](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += c * g[i];
    });
}

Var sum(Var x) {
    double s = 0.0;
    for (double v : x.value().data) s += v;
    return tape_of(x).record("sum", Tensor::scalar(s), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
        const double gv = g.item();
        for (double& v : gi[0]->data) v += gv;
    });
}

Var reshape(Var x, Shape shape) {
    if (Tensor::count(shape) != x.value().size()) {
        shape_error("reshape", shape_string(x.shape()) + " -> " + shape_string(shape));
    }
    Tensor y(std::move(shape), x.value().data);
    return tape_of(x).record("reshape", std::move(y), {x}, [](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < g.size(); ++i) (*gi[0])[i] += g[i];
    });
}

Var channel_mix(Var w, Var f) {
    const Tensor& W = w.value();
    const Tensor& F = f.value();
    require_rank("channel_mix", W, 2);
    require_rank("channel_mix", F, 3);
    const std::size_t co = W.dim(0), ci = W.dim(1), n = F.dim(0), d = F.dim(2);
    if (F.dim(1) != ci) shape_error("channel_mix", "weight " + shape_string(W.shape) + " vs feature " + shape_string(F.shape));
    Tensor y(Shape{n, co, d});
    const auto Wm = as_matrix(W, co, ci);
    for (std::size_t i = 0; i < n; ++i) {
        MatMap(y.data.data() + i * co * d, static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(d)).noalias() =
            Wm * ConstMatMap(F.data.data() + i * ci * d, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(d));
    }
    return tape_of(w).record("channel_mix", std::move(y), {w, f},
        [W, F, n, co, ci, d](const Tensor& g, std::span<Tensor* const> gi) {
            const auto Wm = as_matrix(W, co, ci);
            for (std::size_t i = 0; i < n; ++i) {
                ConstMatMap G(g.data.data() + i * co * d, static_cast<Eigen::Index>(co), static_cast<Eigen::Index>(d));
                ConstMatMap Fi(F.data.data() + i * ci * d, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(d));
                if (gi[0]) as_matrix(*gi[0], co, ci).noalias() += G * Fi.transpose();
                if (gi[1]) {
                    MatMap(gi[1]->data.data() + i * ci * d, static_cast<Eigen::Index>(ci), static_cast<Eigen::Index>(d)).noalias() +=
                        Wm.transpose() * G;
                }
            }
        });
}

Var node_mix(Var w, Var f) {
    const Tensor& W = w.value();
    const Tensor& F = f.value();
    require_rank("node_mix", W, 3);
    require_rank("node_mix", F, 3);
    const std::size_t n = W.dim(0), co = W.dim(1), ci = W.dim(2), d = F.dim(2);
    if (F.dim(0) != n || F.dim(1) != ci) shape_error("node_mix", shape_string(W.shape) + " vs " + shape_string(F.shape));
    Tensor y(Shape{n, co, d});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < co; ++a) {
            for (std::size_t b = 0; b < ci; ++b) {
                const double wv = W[(i * co + a) * ci + b];
                for (std::size_t m = 0; m < d; ++m) y[(i * co + a) * d + m] += wv * F[(i * ci + b) * d + m];
            }
        }
    }
    return tape_of(w).record("node_mix", std::move(y), {w, f},
        [W, F, n, co, ci, d](const Tensor& g, std::span<Tensor* const> gi) {
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t a = 0; a < co; ++a) {
                    for (std::size_t b = 0; b < ci; ++b) {
                        const std::size_t wi = (i * co + a) * ci + b;
                        double acc = 0.0;
                        for (std::size_t m = 0; m < d; ++m) {
                            const double gv = g[(i * co + a) * d + m];
                            acc += gv * F[(i * ci + b) * d + m];
                            if (gi[1]) (*gi[1])[(i * ci + b) * d + m] += W[wi] * gv;
                        }
                        if (gi[0]) (*gi[0])[wi] += acc;
                    }
                }
            }
        });
}

Var gram(Var f) {
    const Tensor& F = f.value();
    require_rank("gram", F, 3);
    const std::size_t n = F.dim(0), c = F.dim(1), d = F.dim(2);
    Tensor y(Shape{n, c * c});
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t a = 0; a < c; ++a) {
            for (std::size_t b = 0; b < c; ++b) {
                double s = 0.0;
                for (std::size_t m = 0; m < d; ++m) s += F[(i * c + a) * d + m] * F[(i * c + b) * d + m];
                y[i * c * c + a * c + b] = s;
            }
        }
    }
    return tape_of(f).record("gram", std::move(y), {f}, [F, n, c, d](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t a = 0; a < c; ++a) {
                for (std::size_t b = 0; b < c; ++b) {
                    const double gv = g[i * c * c + a * c + b];
                    for (std::size_t m = 0; m < d; ++m) {
                        (*gi[0])[(i * c + a) * d + m] += gv * F[(i * c + b) * d + m];
                        (*gi[0])[(i * c + b) * d + m] += gv * F[(i * c + a) * d + m];
                    }
                }
            }
        }
    });
}

Var channel_norm(Var f, double eps) {
    const Tensor& F = f.value();
    require_rank("channel_norm", F, 3);
    const std::size_t rows = F.dim(0) * F.dim(1), d = F.dim(2);
    Tensor y(Shape{F.dim(0), F.dim(1)});
    for (std::size_t r = 0; r < rows; ++r) {
        double s = eps;
        for (std::size_t m = 0; m < d; ++m) s += F[r * d + m] * F[r * d + m];
        y[r] = std::sqrt(s);
    }
    return tape_of(f).record("channel_norm", y, {f}, [F, y, rows, d](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t r = 0; r < rows; ++r) {
            const double k = g[r] / y[r];
            for (std::size_t m = 0; m < d; ++m) (*gi[0])[r * d + m] += k * F[r * d + m];
        }
    });
}

Var scale_channels(Var f, Var s) {
    const Tensor& F = f.value();
    const Tensor& S = s.value();
    require_rank("scale_channels", F, 3);
    if (S.shape != Shape{F.dim(0), F.dim(1)}) shape_error("scale_channels", shape_string(F.shape) + " vs " + shape_string(S.shape));
    const std::size_t rows = S.size(), d = F.dim(2);
    Tensor y = F;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t m = 0; m < d; ++m) y[r * d + m] *= S[r];
    }
    return tape_of(f).record("scale_channels", std::move(y), {f, s},
        [F, S, rows, d](const Tensor& g, std::span<Tensor* const> gi) {
            for (std::size_t r = 0; r < rows; ++r) {
                double acc = 0.0;
                for (std::size_t m = 0; m < d; ++m) {
                    acc += g[r * d + m] * F[r * d + m];
                    if (gi[0]) (*gi[0])[r * d + m] += g[r * d + m] * S[r];
                }
                if (gi[1]) (*gi[1])[r] += acc;
            }
        });
}

Var edge_message(Var phi, std::shared_ptr<const Tensor> basis, Var f, IndexList src) {
    const Tensor& P = phi.value();
    const Tensor& F = f.value();
    if (!basis) shape_error("edge_message", "null basis");
    const Tensor& B = *basis;
    require_rank("edge_message", P, 4);
    require_rank("edge_message", B, 4);
    require_rank("edge_message", F, 3);
    const std::size_t e_count = P.dim(0), nj = P.dim(1), co = P.dim(2), ci = P.dim(3);
    const std::size_t dl = B.dim(2), dk = B.dim(3);
    if (B.dim(0) != e_count || B.dim(1) != nj) shape_error("edge_message", "basis " + shape_string(B.shape) + " vs coefficients " + shape_string(P.shape));
    if (F.dim(1) != ci || F.dim(2) != dk) shape_error("edge_message", "feature " + shape_string(F.shape) + " vs basis " + shape_string(B.shape));
    check_index("edge_message", src, e_count, F.dim(0));

    // t[e, J, ci, a] = sum_b basis[e, J, a, b] f[src e, ci, b]
    Tensor t(Shape{e_count, nj, ci, dl});
    Tensor y(Shape{e_count, co, dl});
    for (std::size_t e = 0; e < e_count; ++e) {
        const double* fe = F.data.data() + (*src)[e] * ci * dk;
        for (std::size_t j = 0; j < nj; ++j) {
            const double* be = B.data.data() + (e * nj + j) * dl * dk;
            double* te = t.data.data() + (e * nj + j) * ci * dl;
            for (std::size_t c = 0; c < ci; ++c) {
                for (std::size_t a = 0; a < dl; ++a) {
                    double s = 0.0;
                    for (std::size_t b = 0; b < dk; ++b) s += be[a * dk + b] * fe[c * dk + b];
                    te[c * dl + a] = s;
                }
            }
            const double* pe = P.data.data() + (e * nj + j) * co * ci;
            double* ye = y.data.data() + e * co * dl;
            for (std::size_t o = 0; o < co; ++o) {
                for (std::size_t c = 0; c < ci; ++c) {
                    const double w = pe[o * ci + c];
                    for (std::size_t a = 0; a < dl; ++a) ye[o * dl + a] += w * te[c * dl + a];
                }
            }
        }
    }
    return tape_of(phi).record("edge_message", std::move(y), {phi, f},
        [P, basis, src, t = std::move(t), e_count, nj, co, ci, dl, dk](const Tensor& g, std::span<Tensor* const> gi) {
            const Tensor& B = *basis;
            std::vector<double> dt(ci * dl);
            for (std::size_t e = 0; e < e_count; ++e) {
                const double* ge = g.data.data() + e * co * dl;
                for (std::size_t j = 0; j < nj; ++j) {
                    const double* te = t.data.data() + (e * nj + j) * ci * dl;
                    const double* pe = P.data.data() + (e * nj + j) * co * ci;
                    if (gi[0]) {
                        double* dp = gi[0]->data.data() + (e * nj + j) * co * ci;
                        for (std::size_t o = 0; o < co; ++o) {
                            for (std::size_t c = 0; c < ci; ++c) {
                                double s = 0.0;
                                for (std::size_t a = 0; a < dl; ++a) s += ge[o * dl + a] * te[c * dl + a];
                                dp[o * ci + c] += s;
                            }
                        }
                    }
                    if (!gi[1]) continue;
                    std::fill(dt.begin(), dt.end(), 0.0);
                    for (std::size_t o = 0; o < co; ++o) {
                        for (std::size_t c = 0; c < ci; ++c) {
                            const double w = pe[o * ci + c];
                            for (std::size_t a = 0; a < dl; ++a) dt[c * dl + a] += w * ge[o * dl + a];
                        }
                    }
                    const double* be = B.data.data() + (e * nj + j) * dl * dk;
                    double* df = gi[1]->data.data() + (*src)[e] * ci * dk;
                    for (std::size_t c = 0; c < ci; ++c) {
                        for (std::size_t a = 0; a < dl; ++a) {
                            const double v = dt[c * dl + a];
                            for (std::size_t b = 0; b < dk; ++b) df[c * dk + b] += be[a * dk + b] * v;
                        }
                    }
                }
            }
        });
}

Var edge_dot(Var q, Var k, IndexList dst, std::size_t heads) {
    const Tensor& Q = q.value();
    const Tensor& K = k.value();
    require_rank("edge_dot", Q, 3);
    require_rank("edge_dot", K, 3);
    const std::size_t e_count = K.dim(0), c = K.dim(1), d = K.dim(2);
    if (Q.dim(1) != c || Q.dim(2) != d) shape_error("edge_dot", "query " + shape_string(Q.shape) + " vs key " + shape_string(K.shape));
    if (heads == 0 || c % heads != 0) shape_error("edge_dot", std::to_string(heads) + " heads do not divide " + std::to_string(c) + " channels");
    check_index("edge_dot", dst, e_count, Q.dim(0));
    const std::size_t per = c / heads;
    Tensor y(Shape{e_count, heads});
    for (std::size_t e = 0; e < e_count; ++e) {
        const double* qe = Q.data.data() + (*dst)[e] * c * d;
        const double* ke = K.data.data() + e * c * d;
        for (std::size_t h = 0; h < heads; ++h) {
            double s = 0.0;
            for (std::size_t i = h * per * d; i < (h + 1) * per * d; ++i) s += qe[i] * ke[i];
            y[e * heads + h] = s;
        }
    }
    return tape_of(q).record("edge_dot", std::move(y), {q, k},
        [Q, K, dst, e_count, heads, per, c, d](const Tensor& g, std::span<Tensor* const> gi) {
            for (std::size_t e = 0; e < e_count; ++e) {
                const std::size_t qo = (*dst)[e] * c * d;
                for (std::size_t h = 0; h < heads; ++h) {
                    const double gv = g[e * heads + h];
                    for (std::size_t i = h * per * d; i < (h + 1) * per * d; ++i) {
                        if (gi[0]) (*gi[0])[qo + i] += gv * K[e * c * d + i];
                        if (gi[1]) (*gi[1])[e * c * d + i] += gv * Q[qo + i];
                    }
                }
            }
        });
}

Var segment_softmax(Var x, IndexList segment, std::size_t segments) {
    const Tensor& X = x.value();
    require_rank("segment_softmax", X, 2);
    const std::size_t rows = X.dim(0), h = X.dim(1);
    check_index("segment_softmax", segment, rows, segments);
    std::vector<double> mx(segments * h, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < h; ++c) {
            double& m = mx[(*segment)[r] * h + c];
            m = std::max(m, X[r * h + c]);
        }
    }
    Tensor y(X.shape);
    std::vector<double> total(segments * h, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < h; ++c) {
            const std::size_t s = (*segment)[r] * h + c;
            y[r * h + c] = std::exp(X[r * h + c] - mx[s]);
            total[s] += y[r * h + c];
        }
    }
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < h; ++c) y[r * h + c] /= total[(*segment)[r] * h + c];
    }
    return tape_of(x).record("segment_softmax", y, {x},
        [y, segment, segments, rows, h](const Tensor& g, std::span<Tensor* const> gi) {
            std::vector<double> dot(segments * h, 0.0);
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < h; ++c) dot[(*segment)[r] * h + c] += y[r * h + c] * g[r * h + c];
            }
            for (std::size_t r = 0; r < rows; ++r) {
                for (std::size_t c = 0; c < h; ++c) {
                    (*gi[0])[r * h + c] += y[r * h + c] * (g[r * h + c] - dot[(*segment)[r] * h + c]);
                }
            }
        });
}

Var attend(Var alpha, Var v, IndexList dst, std::size_t segments) {
    const Tensor& A = alpha.value();
    const Tensor& V = v.value();
    require_rank("attend", A, 2);
    require_rank("attend", V, 3);
    const std::size_t e_count = V.dim(0), c = V.dim(1), d = V.dim(2), heads = A.dim(1);
    if (A.dim(0) != e_count) shape_error("attend", "weights " + shape_string(A.shape) + " vs values " + shape_string(V.shape));
    if (heads == 0 || c % heads != 0) shape_error("attend", std::to_string(heads) + " heads do not divide " + std::to_string(c) + " channels");
    check_index("attend", dst, e_count, segments);
    const std::size_t per = c / heads;
    Tensor y(Shape{segments, c, d});
    for (std::size_t e = 0; e < e_count; ++e) {
        double* ye = y.data.data() + (*dst)[e] * c * d;
        const double* ve = V.data.data() + e * c * d;
        for (std::size_t ch = 0; ch < c; ++ch) {
            const double a = A[e * heads + ch / per];
            for (std::size_t m = 0; m < d; ++m) ye[ch * d + m] += a * ve[ch * d + m];
        }
    }
    return tape_of(alpha).record("attend", std::move(y), {alpha, v},
        [A, V, dst, e_count, heads, per, c, d](const Tensor& g, std::span<Tensor* const> gi) {
            for (std::size_t e = 0; e < e_count; ++e) {
                const double* ge = g.data.data() + (*dst)[e] * c * d;
                for (std::size_t ch = 0; ch < c; ++ch) {
                    const std::size_t h = e * heads + ch / per;
                    double acc = 0.0;
                    for (std::size_t m = 0; m < d; ++m) {
                        acc += ge[ch * d + m] * V[(e * c + ch) * d + m];
                        if (gi[1]) (*gi[1])[(e * c + ch) * d + m] += A[h] * ge[ch * d + m];
                    }
                    if (gi[0]) (*gi[0])[h] += acc;
                }
            }
        });
}

Var segment_sum(Var x, IndexList segment, std::size_t segments) {
    const Tensor& X = x.value();
    if (X.rank() == 0) shape_error("segment_sum", "scalar input");
    const std::size_t rows = X.dim(0), w = X.size() / std::max<std::size_t>(rows, 1);
    check_index("segment_sum", segment, rows, segments);
    Shape shape = X.shape;
    shape[0] = segments;
    Tensor y(shape);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t s = (*segment)[r];
        for (std::size_t i = 0; i < w; ++i) y[s * w + i] += X[r * w + i];
    }
    return tape_of(x).record("segment_sum", std::move(y), {x},
        [segment, rows, w](const Tensor& g, std::span<Tensor* const> gi) {
            for (std::size_t r = 0; r < rows; ++r) {
                const std::size_t s = (*segment)[r];
                for (std::size_t i = 0; i < w; ++i) (*gi[0])[r * w + i] += g[s * w + i];
            }
        });
}

Var segment_max(Var x, IndexList segment, std::size_t segments) {
    const Tensor& X = x.value();
    require_rank("segment_max", X, 2);
    const std::size_t rows = X.dim(0), w = X.dim(1);
    check_index("segment_max", segment, rows, segments);
    constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> arg(segments * w, kNone);
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t s = (*segment)[r];
        for (std::size_t i = 0; i < w; ++i) {
            std::size_t& a = arg[s * w + i];
            if (a == kNone || X[r * w + i] > X[a * w + i]) a = r;
        }
    }
    Tensor y(Shape{segments, w});
    for (std::size_t k = 0; k < arg.size(); ++k) {
        if (arg[k] == kNone) shape_error("segment_max", "empty segment " + std::to_string(k / w));
        y[k] = X[arg[k] * w + k % w];
    }
    return tape_of(x).record("segment_max", std::move(y), {x}, [arg, w](const Tensor& g, std::span<Tensor* const> gi) {
        for (std::size_t k = 0; k < arg.size(); ++k) (*gi[0])[arg[k] * w + k % w] += g[k];
    });
}

}  // namespace se3
