#include "smat/ops.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace smat::ag {

namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

CMapR cmap(const Tensor& t) { return CMapR(t.data(), t.rows(), t.cols()); }
MapR gmap(Graph& g, Var v) {
    Tensor& gr = g.grad(v.id());
    return MapR(gr.data(), gr.rows(), gr.cols());
}

thread_local SoftmaxObserver softmax_observer;
thread_local BranchObserver branch_observer;

class BranchDigest {
public:
    void add(std::int64_t v) {
        h_ ^= static_cast<std::uint64_t>(v);
        h_ *= 0x100000001b3ULL;
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

template <class Code>
void report_branches(std::size_t n, Code code) {
    if (!branch_observer) return;
    BranchDigest d;
    for (std::size_t i = 0; i < n; ++i) d.add(code(i));
    branch_observer(d.value());
}

void require(bool ok, const char* op, const std::string& what) {
    if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

Graph& graph_of(Var v) {
    if (!v.valid()) throw std::invalid_argument("op on an empty Var");
    return *v.graph();
}

// Applies f elementwise; df(x, y) gives dy/dx.
template <class F, class DF>
Var unary(Var a, F f, DF df) {
    Graph& g = graph_of(a);
    const Tensor& x = a.value();
    Tensor y = Tensor::matrix(x.rows(), x.cols());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
    return g.make(std::move(y), {a}, [a, df](Graph& g, const Tensor& out, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        const Tensor& x = g.value(a.id());
        Tensor& gx = g.grad(a.id());
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] += go[i] * df(x[i], out[i]);
    });
}

void check_same(Var a, Var b, const char* op) {
    require(a.value().size() == b.value().size() && a.rows() == b.rows(), op,
            "shape mismatch " + a.value().shape_string() + " vs " + b.value().shape_string());
}

double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

} // namespace

void set_softmax_observer(SoftmaxObserver observer) { softmax_observer = std::move(observer); }
void set_branch_observer(BranchObserver observer) { branch_observer = std::move(observer); }

Var matmul(Var a, Var b) {
    Graph& g = graph_of(a);
    require(a.cols() == b.rows(), "matmul",
            "inner dims " + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()));
    Tensor y = Tensor::matrix(a.rows(), b.cols());
    MapR(y.data(), y.rows(), y.cols()).noalias() = cmap(a.value()) * cmap(b.value());
    return g.make(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        auto G = cmap(go);
        if (g.requires_grad(a.id())) gmap(g, a).noalias() += G * cmap(g.value(b.id())).transpose();
        if (g.requires_grad(b.id())) gmap(g, b).noalias() += cmap(g.value(a.id())).transpose() * G;
    });
}

Var linear(Var x, Var w, Var b) {
    Graph& g = graph_of(x);
    require(x.cols() == w.rows(), "linear",
            "input width " + std::to_string(x.cols()) + " vs weight rows " + std::to_string(w.rows()));
    require(static_cast<int>(b.value().size()) == w.cols(), "linear", "bias width");
    Tensor y = Tensor::matrix(x.rows(), w.cols());
    MapR Y(y.data(), y.rows(), y.cols());
    Y.noalias() = cmap(x.value()) * cmap(w.value());
    Eigen::Map<const Eigen::RowVectorXd> bias(b.value().data(), w.cols());
    Y.rowwise() += bias;
    return g.make(std::move(y), {x, w, b}, [x, w, b](Graph& g, const Tensor&, const Tensor& go) {
        auto G = cmap(go);
        if (g.requires_grad(x.id())) gmap(g, x).noalias() += G * cmap(g.value(w.id())).transpose();
        if (g.requires_grad(w.id())) gmap(g, w).noalias() += cmap(g.value(x.id())).transpose() * G;
        if (g.requires_grad(b.id())) {
            Tensor& gb = g.grad(b.id());
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) += G.colwise().sum();
        }
    });
}

Var transpose(Var a) {
    Graph& g = graph_of(a);
    Tensor y = Tensor::matrix(a.cols(), a.rows());
    MapR(y.data(), y.rows(), y.cols()) = cmap(a.value()).transpose();
    return g.make(std::move(y), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
        if (g.requires_grad(a.id())) gmap(g, a) += cmap(go).transpose();
    });
}

Var add(Var a, Var b) {
    check_same(a, b, "add");
    Graph& g = graph_of(a);
    Tensor y = Tensor::matrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] + b.value()[i];
    return g.make(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        for (Var v : {a, b}) {
            if (!g.requires_grad(v.id())) continue;
            Tensor& gv = g.grad(v.id());
            for (std::size_t i = 0; i < go.size(); ++i) gv[i] += go[i];
        }
    });
}

Var sub(Var a, Var b) {
    check_same(a, b, "sub");
    Graph& g = graph_of(a);
    Tensor y = Tensor::matrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] - b.value()[i];
    return g.make(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        if (g.requires_grad(a.id())) {
            Tensor& ga = g.grad(a.id());
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
        }
        if (g.requires_grad(b.id())) {
            Tensor& gb = g.grad(b.id());
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
        }
    });
}

Var mul(Var a, Var b) {
    check_same(a, b, "mul");
    Graph& g = graph_of(a);
    Tensor y = Tensor::matrix(a.rows(), a.cols());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = a.value()[i] * b.value()[i];
    return g.make(std::move(y), {a, b}, [a, b](Graph& g, const Tensor&, const Tensor& go) {
        const Tensor& av = g.value(a.id());
        const Tensor& bv = g.value(b.id());
        if (g.requires_grad(a.id())) {
            Tensor& ga = g.grad(a.id());
            for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * bv[i];
        }
        if (g.requires_grad(b.id())) {
            Tensor& gb = g.grad(b.id());
            for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * av[i];
        }
    });
}

Var scale(Var a, double s) {
    return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_row(Var a, Var row) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    require(static_cast<int>(row.value().size()) == c, "add_row", "row width mismatch");
    Tensor y = Tensor::matrix(n, c);
    MapR(y.data(), n, c) = cmap(a.value());
    Eigen::Map<const Eigen::RowVectorXd> r(row.value().data(), c);
    MapR(y.data(), n, c).rowwise() += r;
    return g.make(std::move(y), {a, row}, [a, row](Graph& g, const Tensor&, const Tensor& go) {
        auto G = cmap(go);
        if (g.requires_grad(a.id())) gmap(g, a) += G;
        if (g.requires_grad(row.id())) {
            Tensor& gr = g.grad(row.id());
            Eigen::Map<Eigen::RowVectorXd>(gr.data(), static_cast<Eigen::Index>(gr.size())) += G.colwise().sum();
        }
    });
}

Var mul_col(Var a, Var s) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    require(static_cast<int>(s.value().size()) == n, "mul_col", "scale length mismatch");
    Tensor y = Tensor::matrix(n, c);
    for (int r = 0; r < n; ++r)
        for (int j = 0; j < c; ++j) y.at(r, j) = a.value().at(r, j) * s.value()[static_cast<std::size_t>(r)];
    return g.make(std::move(y), {a, s}, [a, s, n, c](Graph& g, const Tensor&, const Tensor& go) {
        const Tensor& av = g.value(a.id());
        const Tensor& sv = g.value(s.id());
        if (g.requires_grad(a.id())) {
            Tensor& ga = g.grad(a.id());
            for (int r = 0; r < n; ++r)
                for (int j = 0; j < c; ++j) ga.at(r, j) += go.at(r, j) * sv[static_cast<std::size_t>(r)];
        }
        if (g.requires_grad(s.id())) {
            Tensor& gs = g.grad(s.id());
            for (int r = 0; r < n; ++r) {
                double acc = 0.0;
                for (int j = 0; j < c; ++j) acc += go.at(r, j) * av.at(r, j);
                gs[static_cast<std::size_t>(r)] += acc;
            }
        }
    });
}

Var relu(Var a) {
    report_branches(a.value().size(), [&](std::size_t i) { return a.value()[i] > 0.0; });
    return unary(a, [](double x) { return x > 0.0 ? x : 0.0; },
                 [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var gelu(Var a) {
    return unary(
        a, [](double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); },
        [](double x, double) { return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * phi(x); });
}

Var sin(Var a) {
    return unary(a, [](double x) { return std::sin(x); }, [](double x, double) { return std::cos(x); });
}

Var cos(Var a) {
    return unary(a, [](double x) { return std::cos(x); }, [](double x, double) { return -std::sin(x); });
}

Var abs(Var a) {
    report_branches(a.value().size(), [&](std::size_t i) { return (a.value()[i] > 0.0) - (a.value()[i] < 0.0); });
    return unary(a, [](double x) { return std::fabs(x); },
                 [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softplus(Var a) {
    return unary(
        a, [](double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
        [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var sigmoid(Var a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                 [](double, double y) { return y * (1.0 - y); });
}

Var reciprocal_one_plus(Var a) {
    return unary(a, [](double x) { return 1.0 / (1.0 + x); }, [](double, double y) { return -y * y; });
}

Var sum(Var a) {
    Graph& g = graph_of(a);
    double s = 0.0;
    for (double v : a.value().values()) s += v;
    return g.make(Tensor::matrix(1, 1, s), {a}, [a](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
    });
}

Var mean(Var a) {
    const auto n = static_cast<double>(a.value().size());
    require(n > 0, "mean", "empty input");
    return scale(sum(a), 1.0 / n);
}

namespace {
template <class Better>
Var row_extreme(Var a, Better better) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    require(c > 0, "row_extreme", "empty rows");
    Tensor y = Tensor::matrix(n, 1);
    std::vector<int> arg(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        int best = 0;
        for (int j = 1; j < c; ++j)
            if (better(a.value().at(r, j), a.value().at(r, best))) best = j;
        arg[static_cast<std::size_t>(r)] = best;
        y[static_cast<std::size_t>(r)] = a.value().at(r, best);
    }
    report_branches(arg.size(), [&](std::size_t i) { return arg[i]; });
    return g.make(std::move(y), {a}, [a, arg](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        for (std::size_t r = 0; r < arg.size(); ++r) ga.at(static_cast<int>(r), arg[r]) += go[r];
    });
}
} // namespace

Var row_max(Var a) { return row_extreme(a, [](double x, double y) { return x > y; }); }
Var row_min(Var a) { return row_extreme(a, [](double x, double y) { return x < y; }); }

Var softmax_rows(Var a) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    Tensor y = Tensor::matrix(n, c);
    for (int r = 0; r < n; ++r) {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < c; ++j) m = std::max(m, a.value().at(r, j));
        double z = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(a.value().at(r, j) - m);
            y.at(r, j) = e;
            z += e;
        }
        for (int j = 0; j < c; ++j) y.at(r, j) /= z;
    }
    if (softmax_observer) softmax_observer(y);
    return g.make(std::move(y), {a}, [a, n, c](Graph& g, const Tensor& out, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        for (int r = 0; r < n; ++r) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += go.at(r, j) * out.at(r, j);
            for (int j = 0; j < c; ++j) ga.at(r, j) += out.at(r, j) * (go.at(r, j) - dot);
        }
    });
}

Var layer_norm(Var a, Var gamma, Var beta, double eps) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    require(static_cast<int>(gamma.value().size()) == c && static_cast<int>(beta.value().size()) == c,
            "layer_norm", "affine width mismatch");
    Tensor y = Tensor::matrix(n, c);
    Tensor xhat = Tensor::matrix(n, c);
    std::vector<double> inv_std(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        double mu = 0.0;
        for (int j = 0; j < c; ++j) mu += a.value().at(r, j);
        mu /= c;
        double var = 0.0;
        for (int j = 0; j < c; ++j) {
            const double d = a.value().at(r, j) - mu;
            var += d * d;
        }
        var /= c;
        const double is = 1.0 / std::sqrt(var + eps);
        inv_std[static_cast<std::size_t>(r)] = is;
        for (int j = 0; j < c; ++j) {
            const double xh = (a.value().at(r, j) - mu) * is;
            xhat.at(r, j) = xh;
            y.at(r, j) = xh * gamma.value()[static_cast<std::size_t>(j)] + beta.value()[static_cast<std::size_t>(j)];
        }
    }
    return g.make(std::move(y), {a, gamma, beta},
                  [a, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std), n, c](
                      Graph& g, const Tensor&, const Tensor& go) {
                      const Tensor& gm = g.value(gamma.id());
                      if (g.requires_grad(gamma.id()) || g.requires_grad(beta.id())) {
                          Tensor& gg = g.grad(gamma.id());
                          Tensor& gb = g.grad(beta.id());
                          for (int r = 0; r < n; ++r)
                              for (int j = 0; j < c; ++j) {
                                  gg[static_cast<std::size_t>(j)] += go.at(r, j) * xhat.at(r, j);
                                  gb[static_cast<std::size_t>(j)] += go.at(r, j);
                              }
                      }
                      if (!g.requires_grad(a.id())) return;
                      Tensor& ga = g.grad(a.id());
                      std::vector<double> dxh(static_cast<std::size_t>(c));
                      for (int r = 0; r < n; ++r) {
                          double s1 = 0.0, s2 = 0.0;
                          for (int j = 0; j < c; ++j) {
                              const double d = go.at(r, j) * gm[static_cast<std::size_t>(j)];
                              dxh[static_cast<std::size_t>(j)] = d;
                              s1 += d;
                              s2 += d * xhat.at(r, j);
                          }
                          const double is = inv_std[static_cast<std::size_t>(r)];
                          for (int j = 0; j < c; ++j)
                              ga.at(r, j) += is / c * (c * dxh[static_cast<std::size_t>(j)] - s1 - xhat.at(r, j) * s2);
                      }
                  });
}

Var l2_normalize_rows(Var a, double eps) {
    Graph& g = graph_of(a);
    const int n = a.rows(), c = a.cols();
    Tensor y = Tensor::matrix(n, c);
    std::vector<double> norm(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        double s = eps;
        for (int j = 0; j < c; ++j) s += a.value().at(r, j) * a.value().at(r, j);
        const double nr = std::sqrt(s);
        norm[static_cast<std::size_t>(r)] = nr;
        for (int j = 0; j < c; ++j) y.at(r, j) = a.value().at(r, j) / nr;
    }
    return g.make(std::move(y), {a}, [a, norm, n, c](Graph& g, const Tensor& out, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        for (int r = 0; r < n; ++r) {
            double dot = 0.0;
            for (int j = 0; j < c; ++j) dot += out.at(r, j) * go.at(r, j);
            const double nr = norm[static_cast<std::size_t>(r)];
            for (int j = 0; j < c; ++j) ga.at(r, j) += (go.at(r, j) - out.at(r, j) * dot) / nr;
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    require(!parts.empty(), "concat_cols", "no inputs");
    Graph& g = graph_of(parts.front());
    const int n = parts.front().rows();
    int total = 0;
    for (Var p : parts) {
        require(p.rows() == n, "concat_cols", "row count mismatch");
        total += p.cols();
    }
    Tensor y = Tensor::matrix(n, total);
    int off = 0;
    for (Var p : parts) {
        MapR(y.data(), n, total).middleCols(off, p.cols()) = cmap(p.value());
        off += p.cols();
    }
    return g.make(std::move(y), parts, [parts, n, total](Graph& g, const Tensor&, const Tensor& go) {
        int off = 0;
        for (Var p : parts) {
            if (g.requires_grad(p.id())) gmap(g, p) += CMapR(go.data(), n, total).middleCols(off, p.cols());
            off += p.cols();
        }
    });
}

Var slice_cols(Var a, int start, int count) {
    Graph& g = graph_of(a);
    require(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols", "range out of bounds");
    const int n = a.rows(), c = a.cols();
    Tensor y = Tensor::matrix(n, count);
    MapR(y.data(), n, count) = cmap(a.value()).middleCols(start, count);
    return g.make(std::move(y), {a}, [a, start, count, n, c](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        MapR(ga.data(), n, c).middleCols(start, count) += cmap(go);
    });
}

Var gather_rows(Var a, const std::vector<int>& rows) {
    Graph& g = graph_of(a);
    const int c = a.cols();
    Tensor y = Tensor::matrix(static_cast<int>(rows.size()), c);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        require(rows[i] >= 0 && rows[i] < a.rows(), "gather_rows", "row index out of range");
        for (int j = 0; j < c; ++j) y.at(static_cast<int>(i), j) = a.value().at(rows[i], j);
    }
    return g.make(std::move(y), {a}, [a, rows, c](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(a.id())) return;
        Tensor& ga = g.grad(a.id());
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (int j = 0; j < c; ++j) ga.at(rows[i], j) += go.at(static_cast<int>(i), j);
    });
}

Var conv2d(Var x, int height, int width, Var w, Var b, int kernel, int stride, int pad) {
    Graph& g = graph_of(x);
    const int cin = x.cols();
    require(x.rows() == height * width, "conv2d", "token count does not match spatial dims");
    require(w.rows() == kernel * kernel * cin, "conv2d", "weight rows != k*k*Cin");
    const int cout = w.cols();
    require(static_cast<int>(b.value().size()) == cout, "conv2d", "bias width");
    const int ho = (height + 2 * pad - kernel) / stride + 1;
    const int wo = (width + 2 * pad - kernel) / stride + 1;
    require(ho > 0 && wo > 0, "conv2d", "empty output");
    const int kdim = kernel * kernel * cin;

    // im2col: one row per output pixel.
    Tensor cols = Tensor::matrix(ho * wo, kdim);
    const Tensor& xv = x.value();
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
            double* row = cols.data() + static_cast<std::size_t>(oy * wo + ox) * kdim;
            for (int ky = 0; ky < kernel; ++ky) {
                const int iy = oy * stride - pad + ky;
                for (int kx = 0; kx < kernel; ++kx) {
                    const int ix = ox * stride - pad + kx;
                    double* dst = row + (ky * kernel + kx) * cin;
                    if (iy < 0 || iy >= height || ix < 0 || ix >= width) continue;
                    const double* src = xv.data() + static_cast<std::size_t>(iy * width + ix) * cin;
                    std::copy(src, src + cin, dst);
                }
            }
        }
    Tensor y = Tensor::matrix(ho * wo, cout);
    MapR Y(y.data(), ho * wo, cout);
    Y.noalias() = cmap(cols) * cmap(w.value());
    Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(b.value().data(), cout);

    return g.make(std::move(y), {x, w, b},
                  [x, w, b, cols = std::move(cols), height, width, kernel, stride, pad, ho, wo, cin, kdim](
                      Graph& g, const Tensor&, const Tensor& go) {
                      auto G = cmap(go);
                      if (g.requires_grad(w.id())) gmap(g, w).noalias() += cmap(cols).transpose() * G;
                      if (g.requires_grad(b.id())) {
                          Tensor& gb = g.grad(b.id());
                          Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) +=
                              G.colwise().sum();
                      }
                      if (!g.requires_grad(x.id())) return;
                      MatR dcols = G * cmap(g.value(w.id())).transpose();
                      Tensor& gx = g.grad(x.id());
                      for (int oy = 0; oy < ho; ++oy)
                          for (int ox = 0; ox < wo; ++ox) {
                              const double* row = dcols.data() + static_cast<std::size_t>(oy * wo + ox) * kdim;
                              for (int ky = 0; ky < kernel; ++ky) {
                                  const int iy = oy * stride - pad + ky;
                                  if (iy < 0 || iy >= height) continue;
                                  for (int kx = 0; kx < kernel; ++kx) {
                                      const int ix = ox * stride - pad + kx;
                                      if (ix < 0 || ix >= width) continue;
                                      double* dst = gx.data() + static_cast<std::size_t>(iy * width + ix) * cin;
                                      const double* src = row + (ky * kernel + kx) * cin;
                                      for (int c = 0; c < cin; ++c) dst[c] += src[c];
                                  }
                              }
                          }
                  });
}

Var depthwise_conv2d(Var x, int height, int width, Var w, Var b, int kernel) {
    Graph& g = graph_of(x);
    const int c = x.cols();
    require(x.rows() == height * width, "depthwise_conv2d", "token count does not match spatial dims");
    require(w.rows() == kernel * kernel && w.cols() == c, "depthwise_conv2d", "weight shape");
    require(static_cast<int>(b.value().size()) == c, "depthwise_conv2d", "bias width");
    const int pad = kernel / 2;
    Tensor y = Tensor::matrix(height * width, c);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    for (int oy = 0; oy < height; ++oy)
        for (int ox = 0; ox < width; ++ox) {
            double* out = y.data() + static_cast<std::size_t>(oy * width + ox) * c;
            for (int ch = 0; ch < c; ++ch) out[ch] = b.value()[static_cast<std::size_t>(ch)];
            for (int ky = 0; ky < kernel; ++ky) {
                const int iy = oy - pad + ky;
                if (iy < 0 || iy >= height) continue;
                for (int kx = 0; kx < kernel; ++kx) {
                    const int ix = ox - pad + kx;
                    if (ix < 0 || ix >= width) continue;
                    const double* in = xv.data() + static_cast<std::size_t>(iy * width + ix) * c;
                    const double* k = wv.data() + static_cast<std::size_t>(ky * kernel + kx) * c;
                    for (int ch = 0; ch < c; ++ch) out[ch] += in[ch] * k[ch];
                }
            }
        }
    return g.make(std::move(y), {x, w, b}, [x, w, b, height, width, kernel, pad, c](Graph& g, const Tensor&,
                                                                                      const Tensor& go) {
        const Tensor& xv = g.value(x.id());
        const Tensor& wv = g.value(w.id());
        const bool gx_on = g.requires_grad(x.id()), gw_on = g.requires_grad(w.id());
        Tensor* gx = gx_on ? &g.grad(x.id()) : nullptr;
        Tensor* gw = gw_on ? &g.grad(w.id()) : nullptr;
        if (g.requires_grad(b.id())) {
            Tensor& gb = g.grad(b.id());
            for (int p = 0; p < height * width; ++p)
                for (int ch = 0; ch < c; ++ch) gb[static_cast<std::size_t>(ch)] += go.at(p, ch);
        }
        if (!gx_on && !gw_on) return;
        for (int oy = 0; oy < height; ++oy)
            for (int ox = 0; ox < width; ++ox) {
                const double* gout = go.data() + static_cast<std::size_t>(oy * width + ox) * c;
                for (int ky = 0; ky < kernel; ++ky) {
                    const int iy = oy - pad + ky;
                    if (iy < 0 || iy >= height) continue;
                    for (int kx = 0; kx < kernel; ++kx) {
                        const int ix = ox - pad + kx;
                        if (ix < 0 || ix >= width) continue;
                        const std::size_t in_off = static_cast<std::size_t>(iy * width + ix) * c;
                        const std::size_t k_off = static_cast<std::size_t>(ky * kernel + kx) * c;
                        for (int ch = 0; ch < c; ++ch) {
                            if (gx) (*gx)[in_off + ch] += gout[ch] * wv[k_off + ch];
                            if (gw) (*gw)[k_off + ch] += gout[ch] * xv[in_off + ch];
                        }
                    }
                }
            }
    });
}

Var upsample_nearest(Var x, int height, int width, int factor) {
    Graph& g = graph_of(x);
    const int c = x.cols();
    require(x.rows() == height * width, "upsample_nearest", "token count does not match spatial dims");
    require(factor >= 1, "upsample_nearest", "factor must be >= 1");
    const int ho = height * factor, wo = width * factor;
    Tensor y = Tensor::matrix(ho * wo, c);
    for (int oy = 0; oy < ho; ++oy)
        for (int ox = 0; ox < wo; ++ox) {
            const double* src = x.value().data() + static_cast<std::size_t>((oy / factor) * width + ox / factor) * c;
            std::copy(src, src + c, y.data() + static_cast<std::size_t>(oy * wo + ox) * c);
        }
    return g.make(std::move(y), {x}, [x, width, factor, ho, wo, c](Graph& g, const Tensor&, const Tensor& go) {
        if (!g.requires_grad(x.id())) return;
        Tensor& gx = g.grad(x.id());
        for (int oy = 0; oy < ho; ++oy)
            for (int ox = 0; ox < wo; ++ox) {
                double* dst = gx.data() + static_cast<std::size_t>((oy / factor) * width + ox / factor) * c;
                const double* src = go.data() + static_cast<std::size_t>(oy * wo + ox) * c;
                for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch];
            }
    });
}

Var avg_pool(Var x, int height, int width, int window) {
    Graph& g = graph_of(x);
    const int c = x.cols();
    require(x.rows() == height * width, "avg_pool", "token count does not match spatial dims");
    require(window >= 1 && height % window == 0 && width % window == 0, "avg_pool", "window must divide dims");
    const int ho = height / window, wo = width / window;
    const double inv = 1.0 / (window * window);
    Tensor y = Tensor::matrix(ho * wo, c);
    for (int iy = 0; iy < height; ++iy)
        for (int ix = 0; ix < width; ++ix) {
            double* dst = y.data() + static_cast<std::size_t>((iy / window) * wo + ix / window) * c;
            const double* src = x.value().data() + static_cast<std::size_t>(iy * width + ix) * c;
            for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch] * inv;
        }
    return g.make(std::move(y), {x}, [x, height, width, window, wo, c, inv](Graph& g, const Tensor&,
                                                                             const Tensor& go) {
        if (!g.requires_grad(x.id())) return;
        Tensor& gx = g.grad(x.id());
        for (int iy = 0; iy < height; ++iy)
            for (int ix = 0; ix < width; ++ix) {
                const double* src = go.data() + static_cast<std::size_t>((iy / window) * wo + ix / window) * c;
                double* dst = gx.data() + static_cast<std::size_t>(iy * width + ix) * c;
                for (int ch = 0; ch < c; ++ch) dst[ch] += src[ch] * inv;
            }
    });
}

Var depthwise_xcorr(Var search, int sh, int sw, Var templ, int th, int tw) {
    Graph& g = graph_of(search);
    const int c = search.cols();
    require(search.rows() == sh * sw && templ.rows() == th * tw, "depthwise_xcorr", "token count mismatch");
    require(templ.cols() == c, "depthwise_xcorr", "channel mismatch");
    const int oy0 = th / 2, ox0 = tw / 2;
    const double inv = 1.0 / (th * tw);
    Tensor y = Tensor::matrix(sh * sw, c);
    const Tensor& sv = search.value();
    const Tensor& tv = templ.value();
    for (int y0 = 0; y0 < sh; ++y0)
        for (int x0 = 0; x0 < sw; ++x0) {
            double* out = y.data() + static_cast<std::size_t>(y0 * sw + x0) * c;
            for (int u = 0; u < th; ++u) {
                const int iy = y0 + u - oy0;
                if (iy < 0 || iy >= sh) continue;
                for (int v = 0; v < tw; ++v) {
                    const int ix = x0 + v - ox0;
                    if (ix < 0 || ix >= sw) continue;
                    const double* s = sv.data() + static_cast<std::size_t>(iy * sw + ix) * c;
                    const double* t = tv.data() + static_cast<std::size_t>(u * tw + v) * c;
                    for (int ch = 0; ch < c; ++ch) out[ch] += s[ch] * t[ch] * inv;
                }
            }
        }
    return g.make(std::move(y), {search, templ}, [search, templ, sh, sw, th, tw, oy0, ox0, inv, c](
                                                     Graph& g, const Tensor&, const Tensor& go) {
        const bool gs_on = g.requires_grad(search.id()), gt_on = g.requires_grad(templ.id());
        if (!gs_on && !gt_on) return;
        const Tensor& sv = g.value(search.id());
        const Tensor& tv = g.value(templ.id());
        Tensor* gs = gs_on ? &g.grad(search.id()) : nullptr;
        Tensor* gt = gt_on ? &g.grad(templ.id()) : nullptr;
        for (int y0 = 0; y0 < sh; ++y0)
            for (int x0 = 0; x0 < sw; ++x0) {
                const double* gout = go.data() + static_cast<std::size_t>(y0 * sw + x0) * c;
                for (int u = 0; u < th; ++u) {
                    const int iy = y0 + u - oy0;
                    if (iy < 0 || iy >= sh) continue;
                    for (int v = 0; v < tw; ++v) {
                        const int ix = x0 + v - ox0;
                        if (ix < 0 || ix >= sw) continue;
                        const std::size_t s_off = static_cast<std::size_t>(iy * sw + ix) * c;
                        const std::size_t t_off = static_cast<std::size_t>(u * tw + v) * c;
                        for (int ch = 0; ch < c; ++ch) {
                            if (gs) (*gs)[s_off + ch] += gout[ch] * tv[t_off + ch] * inv;
                            if (gt) (*gt)[t_off + ch] += gout[ch] * sv[s_off + ch] * inv;
                        }
                    }
                }
            }
    });
}

Var pairwise_distance(Var a, Var b, double eps) {
    Graph& g = graph_of(a);
    const int na = a.rows(), nb = b.rows(), c = a.cols();
    require(b.cols() == c, "pairwise_distance", "channel mismatch");
    Tensor y = Tensor::matrix(na, nb);
    for (int i = 0; i < na; ++i)
        for (int j = 0; j < nb; ++j) {
            double s = eps;
            for (int k = 0; k < c; ++k) {
                const double d = a.value().at(i, k) - b.value().at(j, k);
                s += d * d;
            }
            y.at(i, j) = std::sqrt(s);
        }
    return g.make(std::move(y), {a, b}, [a, b, na, nb, c](Graph& g, const Tensor& out, const Tensor& go) {
        const bool ga_on = g.requires_grad(a.id()), gb_on = g.requires_grad(b.id());
        if (!ga_on && !gb_on) return;
        const Tensor& av = g.value(a.id());
        const Tensor& bv = g.value(b.id());
        Tensor* ga = ga_on ? &g.grad(a.id()) : nullptr;
        Tensor* gb = gb_on ? &g.grad(b.id()) : nullptr;
        for (int i = 0; i < na; ++i)
            for (int j = 0; j < nb; ++j) {
                const double f = go.at(i, j) / out.at(i, j);
                for (int k = 0; k < c; ++k) {
                    const double d = (av.at(i, k) - bv.at(j, k)) * f;
                    if (ga) ga->at(i, k) += d;
                    if (gb) gb->at(j, k) -= d;
                }
            }
    });
}

Var scatter_max(Var x, const std::vector<int>& cell, int num_cells) {
    Graph& g = graph_of(x);
    const int n = x.rows(), c = x.cols();
    require(static_cast<int>(cell.size()) == n, "scatter_max", "one cell index per row required");
    Tensor y = Tensor::matrix(num_cells, c);
    std::vector<int> arg(static_cast<std::size_t>(num_cells) * c, -1);
    for (int r = 0; r < n; ++r) {
        const int k = cell[static_cast<std::size_t>(r)];
        require(k >= 0 && k < num_cells, "scatter_max", "cell index out of range");
        for (int ch = 0; ch < c; ++ch) {
            int& a = arg[static_cast<std::size_t>(k) * c + ch];
            if (a < 0 || x.value().at(r, ch) > y.at(k, ch)) {
                a = r;
                y.at(k, ch) = x.value().at(r, ch);
            }
        }
    }
    report_branches(arg.size(), [&](std::size_t i) { return arg[i]; });
    return g.make(std::move(y), {x}, [x, arg = std::move(arg), num_cells, c](Graph& g, const Tensor&,
                                                                              const Tensor& go) {
        if (!g.requires_grad(x.id())) return;
        Tensor& gx = g.grad(x.id());
        for (int k = 0; k < num_cells; ++k)
            for (int ch = 0; ch < c; ++ch) {
                const int r = arg[static_cast<std::size_t>(k) * c + ch];
                if (r >= 0) gx.at(r, ch) += go.at(k, ch);
            }
    });
}

} // namespace smat::ag
