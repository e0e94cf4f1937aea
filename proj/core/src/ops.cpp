#include "teddn/ops.hpp"

#include "teddn/error.hpp"
#include "teddn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace teddn::ops {

namespace {

bool g_adjoint_fault = false;

std::vector<long> pad_shape(const std::vector<long>& s, int rank) {
    std::vector<long> out(static_cast<std::size_t>(rank), 1);
    std::copy(s.begin(), s.end(), out.end() - static_cast<long>(s.size()));
    return out;
}

// Row-major strides of `padded`, with 0 on size-1 axes so the same offsets
// drive broadcast iteration.
std::vector<long> broadcast_strides(const std::vector<long>& padded) {
    std::vector<long> st(padded.size());
    long acc = 1;
    for (int d = static_cast<int>(padded.size()) - 1; d >= 0; --d) {
        st[static_cast<std::size_t>(d)] = padded[static_cast<std::size_t>(d)] == 1 ? 0 : acc;
        acc *= padded[static_cast<std::size_t>(d)];
    }
    return st;
}

template <class F>
Tensor binary_raw(const Tensor& a, const Tensor& b, F f) {
    if (a.shape() == b.shape()) {
        Tensor out(a.shape());
        const real* pa = a.data();
        const real* pb = b.data();
        real* po = out.data();
        const long n = out.size();
        for (long i = 0; i < n; ++i) po[i] = f(pa[i], pb[i]);
        return out;
    }
    std::vector<long> oshape = broadcast_shape(a.shape(), b.shape());
    Tensor out(oshape);
    const int rank = out.rank();
    if (b.size() == 1) {
        const real bv = b.data()[0];
        const real* pa = a.data();
        real* po = out.data();
        const long n = out.size();
        for (long i = 0; i < n; ++i) po[i] = f(pa[i], bv);
        return out;
    }
    if (a.size() == 1) {
        const real av = a.data()[0];
        const real* pb = b.data();
        real* po = out.data();
        const long n = out.size();
        for (long i = 0; i < n; ++i) po[i] = f(av, pb[i]);
        return out;
    }
    const std::vector<long> sa = broadcast_strides(pad_shape(a.shape(), rank));
    const std::vector<long> sb = broadcast_strides(pad_shape(b.shape(), rank));
    std::vector<long> idx(static_cast<std::size_t>(rank), 0);
    const real* pa = a.data();
    const real* pb = b.data();
    real* po = out.data();
    const long n = out.size();
    long oa = 0;
    long ob = 0;
    for (long o = 0; o < n; ++o) {
        po[o] = f(pa[oa], pb[ob]);
        for (int d = rank - 1; d >= 0; --d) {
            auto du = static_cast<std::size_t>(d);
            if (++idx[du] < oshape[du]) {
                oa += sa[du];
                ob += sb[du];
                break;
            }
            idx[du] = 0;
            oa -= sa[du] * (oshape[du] - 1);
            ob -= sb[du] * (oshape[du] - 1);
        }
    }
    return out;
}

template <class F>
Tensor unary_raw(const Tensor& x, F f) {
    Tensor out(x.shape());
    const real* px = x.data();
    real* po = out.data();
    const long n = x.size();
    for (long i = 0; i < n; ++i) po[i] = f(px[i]);
    return out;
}

Tensor broadcast_to_raw(const Tensor& x, const std::vector<long>& shape) {
    if (x.shape() == shape) return x;
    if (broadcast_shape(x.shape(), shape) != shape)
        throw DimensionError("cannot broadcast " + x.shape_str() + " to " + shape_to_string(shape));
    Tensor out(shape);
    const int rank = out.rank();
    const std::vector<long> sx = broadcast_strides(pad_shape(x.shape(), rank));
    std::vector<long> idx(static_cast<std::size_t>(rank), 0);
    const real* px = x.data();
    real* po = out.data();
    const long n = out.size();
    long ox = 0;
    for (long o = 0; o < n; ++o) {
        po[o] = px[ox];
        for (int d = rank - 1; d >= 0; --d) {
            auto du = static_cast<std::size_t>(d);
            if (++idx[du] < shape[du]) {
                ox += sx[du];
                break;
            }
            idx[du] = 0;
            ox -= sx[du] * (shape[du] - 1);
        }
    }
    return out;
}

// Sum `g` down to `shape` by collapsing the axes broadcasting stretched.
Tensor reduce_to_shape_raw(const Tensor& g, const std::vector<long>& shape) {
    if (g.shape() == shape) return g;
    Tensor out = Tensor::zeros(pad_shape(shape, g.rank()));
    const int rank = g.rank();
    const std::vector<long> so = broadcast_strides(out.shape());
    const std::vector<long>& gshape = g.shape();
    std::vector<long> idx(static_cast<std::size_t>(rank), 0);
    const real* pg = g.data();
    real* po = out.data();
    const long n = g.size();
    long oo = 0;
    for (long i = 0; i < n; ++i) {
        po[oo] += pg[i];
        for (int d = rank - 1; d >= 0; --d) {
            auto du = static_cast<std::size_t>(d);
            if (++idx[du] < gshape[du]) {
                oo += so[du];
                break;
            }
            idx[du] = 0;
            oo -= so[du] * (gshape[du] - 1);
        }
    }
    return out.reshaped(shape);
}

// C(m,n) += A(m,k) * B(k,n). Plain ikj loops; deterministic and
// autovectorizable.
void mm_nn(const real* a, const real* b, real* c, long m, long k, long n) {
    for (long i = 0; i < m; ++i) {
        const real* arow = a + i * k;
        real* crow = c + i * n;
        for (long p = 0; p < k; ++p) {
            const real av = arow[p];
            const real* brow = b + p * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C(m,n) += A(m,k) * B(n,k)^T.
void mm_nt(const real* a, const real* b, real* c, long m, long k, long n) {
    for (long i = 0; i < m; ++i) {
        const real* arow = a + i * k;
        real* crow = c + i * n;
        for (long j = 0; j < n; ++j) {
            const real* brow = b + j * k;
            real acc = 0;
            for (long p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C(m,n) += A(k,m)^T * B(k,n).
void mm_tn(const real* a, const real* b, real* c, long m, long k, long n) {
    for (long p = 0; p < k; ++p) {
        const real* arow = a + p * m;
        const real* brow = b + p * n;
        for (long i = 0; i < m; ++i) {
            const real av = arow[i];
            real* crow = c + i * n;
            for (long j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

real mul_f(real x, real y) { return x * y; }
real div_f(real x, real y) { return x / y; }

// Record a binary broadcasting op whose input adjoints are computed by `fa`
// and `fb` from (upstream, a, b) before reduce_to_shape.
template <class FA, class FB>
Tensor bind_binary(Tensor out, const Tensor& a, const Tensor& b, FA fa, FB fb) {
    Tape* tape = Tape::joint({&a, &b});
    if (!tape) return out;
    const int an = a.node();
    const int bn = b.node();
    const Tensor ad = a.detached();
    const Tensor bd = b.detached();
    int node = tape->record(out.shape(), [an, bn, ad, bd, fa, fb](const Tensor& g, Tape& tp) {
        if (an >= 0) tp.accumulate(an, reduce_to_shape_raw(fa(g, ad, bd), ad.shape()));
        if (bn >= 0) tp.accumulate(bn, reduce_to_shape_raw(fb(g, ad, bd), bd.shape()));
    });
    return tape->bind(std::move(out), node);
}

// Record a unary op with local derivative `df(x_i, y_i)`.
template <class DF>
Tensor bind_unary(Tensor out, const Tensor& x, DF df) {
    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    const Tensor xd = x.detached();
    const Tensor yd = out.detached();
    int node = tape->record(out.shape(), [xn, xd, yd, df](const Tensor& g, Tape& tp) {
        Tensor gx(xd.shape());
        const real* pg = g.data();
        const real* px = xd.data();
        const real* py = yd.data();
        real* po = gx.data();
        const long n = gx.size();
        for (long i = 0; i < n; ++i) po[i] = pg[i] * df(px[i], py[i]);
        tp.accumulate(xn, gx);
    });
    return tape->bind(std::move(out), node);
}

int normalize_axis(int axis, int rank, const char* op) {
    if (axis < 0 || axis >= rank)
        throw DimensionError(std::string(op) + ": axis " + std::to_string(axis) +
                             " out of range for rank " + std::to_string(rank));
    return axis;
}

} // namespace

void set_adjoint_fault_for_testing(bool enabled) { g_adjoint_fault = enabled; }

std::vector<long> broadcast_shape(const std::vector<long>& a, const std::vector<long>& b) {
    const int rank = static_cast<int>(std::max(a.size(), b.size()));
    std::vector<long> pa = pad_shape(a, rank);
    std::vector<long> pb = pad_shape(b, rank);
    std::vector<long> out(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d) {
        auto du = static_cast<std::size_t>(d);
        if (pa[du] == pb[du] || pb[du] == 1)
            out[du] = pa[du];
        else if (pa[du] == 1)
            out[du] = pb[du];
        else
            throw DimensionError("shapes " + shape_to_string(a) + " and " + shape_to_string(b) +
                                 " are not broadcast-compatible");
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0))
        throw DimensionError("matmul expects (m,k) x (k,n), got " + a.shape_str() + " x " +
                             b.shape_str());
    const long m = a.extent(0);
    const long k = a.extent(1);
    const long n = b.extent(1);
    Tensor out = Tensor::zeros({m, n});
    mm_nn(a.data(), b.data(), out.data(), m, k, n);

    Tape* tape = Tape::joint({&a, &b});
    if (!tape) return out;
    const int an = a.node();
    const int bn = b.node();
    const Tensor ad = a.detached();
    const Tensor bd = b.detached();
    int node = tape->record(out.shape(), [an, bn, ad, bd, m, k, n](const Tensor& g, Tape& tp) {
        if (an >= 0) {
            Tensor ga = Tensor::zeros({m, k});
            mm_nt(g.data(), bd.data(), ga.data(), m, n, k);
            tp.accumulate(an, ga);
        }
        if (bn >= 0) {
            Tensor gb = Tensor::zeros({k, n});
            mm_tn(ad.data(), g.data(), gb.data(), k, m, n);
            tp.accumulate(bn, gb);
        }
    });
    return tape->bind(std::move(out), node);
}

Tensor add(const Tensor& a, const Tensor& b) {
    return bind_binary(
        binary_raw(a, b, [](real x, real y) { return x + y; }), a, b,
        [](const Tensor& g, const Tensor&, const Tensor&) { return g; },
        [](const Tensor& g, const Tensor&, const Tensor&) { return g; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    return bind_binary(
        binary_raw(a, b, [](real x, real y) { return x - y; }), a, b,
        [](const Tensor& g, const Tensor&, const Tensor&) { return g; },
        [](const Tensor& g, const Tensor&, const Tensor&) {
            return unary_raw(g, [](real v) { return -v; });
        });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    return bind_binary(
        binary_raw(a, b, mul_f), a, b,
        [](const Tensor& g, const Tensor&, const Tensor& bv) { return binary_raw(g, bv, mul_f); },
        [](const Tensor& g, const Tensor& av, const Tensor&) { return binary_raw(g, av, mul_f); });
}

Tensor div(const Tensor& a, const Tensor& b) {
    return bind_binary(
        binary_raw(a, b, div_f), a, b,
        [](const Tensor& g, const Tensor&, const Tensor& bv) { return binary_raw(g, bv, div_f); },
        [](const Tensor& g, const Tensor& av, const Tensor& bv) {
            Tensor t = binary_raw(binary_raw(g, av, mul_f), bv, div_f);
            return binary_raw(unary_raw(t, [](real v) { return -v; }), bv, div_f);
        });
}

Tensor sigmoid(const Tensor& x) {
    Tensor out = unary_raw(x, [](real v) {
        if (v >= 0) {
            const real e = std::exp(-v);
            return static_cast<real>(1) / (1 + e);
        }
        const real e = std::exp(v);
        return e / (1 + e);
    });
    return bind_unary(std::move(out), x, [](real, real y) { return y * (1 - y); });
}

Tensor relu(const Tensor& x) {
    Tensor out = unary_raw(x, [](real v) { return v > 0 ? v : static_cast<real>(0); });
    return bind_unary(std::move(out), x,
                      [](real xv, real) { return xv > 0 ? static_cast<real>(1) : static_cast<real>(0); });
}

Tensor tanh(const Tensor& x) {
    Tensor out = unary_raw(x, [](real v) { return std::tanh(v); });
    return bind_unary(std::move(out), x, [](real, real y) {
        const real d = 1 - y * y;
        return g_adjoint_fault ? d * static_cast<real>(1.01) + static_cast<real>(1e-3) : d;
    });
}

Tensor sqrt(const Tensor& x) {
    Tensor out = unary_raw(x, [](real v) { return std::sqrt(v); });
    // 0 at y == 0: keeps exactly-constant variance inputs out of NaN land,
    // matching the relu'(0) = 0 convention.
    return bind_unary(std::move(out), x, [](real, real y) {
        return y > 0 ? 1 / (2 * y) : static_cast<real>(0);
    });
}

Tensor abs(const Tensor& x) {
    Tensor out = unary_raw(x, [](real v) { return std::fabs(v); });
    return bind_unary(std::move(out), x, [](real xv, real) {
        if (xv > 0) return static_cast<real>(1);
        if (xv < 0) return static_cast<real>(-1);
        return static_cast<real>(0);
    });
}

namespace {

Tensor reduce_impl(const Tensor& x, std::vector<int> axes, bool keep_dims, bool mean) {
    const int rank = x.rank();
    for (int& a : axes) a = normalize_axis(a, rank, mean ? "reduce_mean" : "reduce_sum");
    std::sort(axes.begin(), axes.end());
    axes.erase(std::unique(axes.begin(), axes.end()), axes.end());
    if (axes.empty()) return x;

    std::vector<long> kept = x.shape(); // reduced axes pinned to 1
    long count = 1;
    for (int a : axes) {
        count *= kept[static_cast<std::size_t>(a)];
        kept[static_cast<std::size_t>(a)] = 1;
    }
    Tensor out = reduce_to_shape_raw(x, kept);
    if (mean && count > 1) {
        real* po = out.data();
        const long n = out.size();
        for (long i = 0; i < n; ++i) po[i] /= static_cast<real>(count);
    }
    std::vector<long> final_shape;
    if (keep_dims) {
        final_shape = kept;
    } else {
        for (int d = 0; d < rank; ++d)
            if (!std::binary_search(axes.begin(), axes.end(), d))
                final_shape.push_back(x.extent(d));
    }
    out = out.reshaped(final_shape);

    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    const std::vector<long> xshape = x.shape();
    const real inv = mean ? 1 / static_cast<real>(count) : static_cast<real>(1);
    int node = tape->record(out.shape(), [xn, xshape, kept, inv](const Tensor& g, Tape& tp) {
        Tensor gx = broadcast_to_raw(g.reshaped(kept), xshape);
        if (inv != 1) {
            Tensor scaled(gx.shape());
            const real* pg = gx.data();
            real* po = scaled.data();
            const long n = gx.size();
            for (long i = 0; i < n; ++i) po[i] = pg[i] * inv;
            gx = scaled;
        }
        tp.accumulate(xn, gx);
    });
    return tape->bind(std::move(out), node);
}

} // namespace

Tensor reduce_sum(const Tensor& x, std::vector<int> axes, bool keep_dims) {
    return reduce_impl(x, std::move(axes), keep_dims, false);
}

Tensor reduce_mean(const Tensor& x, std::vector<int> axes, bool keep_dims) {
    return reduce_impl(x, std::move(axes), keep_dims, true);
}

Tensor mean_all(const Tensor& x) {
    std::vector<int> axes(static_cast<std::size_t>(x.rank()));
    std::iota(axes.begin(), axes.end(), 0);
    if (axes.empty()) return x; // already rank-0
    return reduce_impl(x, std::move(axes), false, true);
}

namespace {

// Copy of x[start, start+len) along `axis` into a fresh tensor.
Tensor slice_raw(const Tensor& x, int axis, long start, long len) {
    std::vector<long> oshape = x.shape();
    oshape[static_cast<std::size_t>(axis)] = len;
    Tensor out(oshape);
    long outer = 1;
    for (int d = 0; d < axis; ++d) outer *= x.extent(d);
    long inner = 1;
    for (int d = axis + 1; d < x.rank(); ++d) inner *= x.extent(d);
    const long xa = x.extent(axis);
    const real* px = x.data();
    real* po = out.data();
    for (long o = 0; o < outer; ++o)
        std::copy_n(px + (o * xa + start) * inner, len * inner, po + o * len * inner);
    return out;
}

// out[start..start+len) along `axis` += g. `out` must be privately owned.
void slice_scatter_add(Tensor& out, const Tensor& g, int axis, long start) {
    long outer = 1;
    for (int d = 0; d < axis; ++d) outer *= out.extent(d);
    long inner = 1;
    for (int d = axis + 1; d < out.rank(); ++d) inner *= out.extent(d);
    const long oa = out.extent(axis);
    const long len = g.extent(axis);
    const real* pg = g.data();
    real* po = out.data();
    for (long o = 0; o < outer; ++o) {
        real* dst = po + (o * oa + start) * inner;
        const real* src = pg + o * len * inner;
        for (long i = 0; i < len * inner; ++i) dst[i] += src[i];
    }
}

} // namespace

Tensor concat(const std::vector<Tensor>& xs, int axis) {
    if (xs.empty()) throw ContractError("concat: no inputs");
    if (xs.size() == 1) return xs[0];
    const int rank = xs[0].rank();
    normalize_axis(axis, rank, "concat");
    long total = 0;
    for (const Tensor& t : xs) {
        if (t.rank() != rank)
            throw DimensionError("concat: mixed ranks " + xs[0].shape_str() + " and " + t.shape_str());
        for (int d = 0; d < rank; ++d)
            if (d != axis && t.extent(d) != xs[0].extent(d))
                throw DimensionError("concat: shapes " + xs[0].shape_str() + " and " + t.shape_str() +
                                     " differ off axis " + std::to_string(axis));
        total += t.extent(axis);
    }
    std::vector<long> oshape = xs[0].shape();
    oshape[static_cast<std::size_t>(axis)] = total;
    Tensor out(oshape);
    long outer = 1;
    for (int d = 0; d < axis; ++d) outer *= oshape[static_cast<std::size_t>(d)];
    long inner = 1;
    for (int d = axis + 1; d < rank; ++d) inner *= oshape[static_cast<std::size_t>(d)];
    real* po = out.data();
    long offset = 0;
    for (const Tensor& t : xs) {
        const long ta = t.extent(axis);
        const real* pt = t.data();
        for (long o = 0; o < outer; ++o)
            std::copy_n(pt + o * ta * inner, ta * inner, po + (o * total + offset) * inner);
        offset += ta;
    }

    Tape* tape = nullptr;
    for (const Tensor& t : xs) {
        Tape* other = Tape::joint({&t});
        if (other && tape && other != tape) throw ContractError("concat: inputs on different tapes");
        if (other) tape = other;
    }
    if (!tape) return out;
    std::vector<int> nodes;
    std::vector<long> sizes;
    for (const Tensor& t : xs) {
        nodes.push_back(t.node());
        sizes.push_back(t.extent(axis));
    }
    int node = tape->record(out.shape(), [nodes, sizes, axis](const Tensor& g, Tape& tp) {
        long start = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            if (nodes[i] >= 0) tp.accumulate(nodes[i], slice_raw(g, axis, start, sizes[i]));
            start += sizes[i];
        }
    });
    return tape->bind(std::move(out), node);
}

Tensor slice(const Tensor& x, int axis, long start, long len) {
    normalize_axis(axis, x.rank(), "slice");
    if (start < 0 || len < 1 || start + len > x.extent(axis))
        throw BoundsError("slice: range [" + std::to_string(start) + ", " +
                          std::to_string(start + len) + ") outside axis " + std::to_string(axis) +
                          " of " + x.shape_str());
    Tensor out = slice_raw(x, axis, start, len);
    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    const std::vector<long> xshape = x.shape();
    int node = tape->record(out.shape(), [xn, xshape, axis, start](const Tensor& g, Tape& tp) {
        Tensor gx = Tensor::zeros(xshape);
        slice_scatter_add(gx, g, axis, start);
        tp.accumulate(xn, gx);
    });
    return tape->bind(std::move(out), node);
}

std::vector<Tensor> split(const Tensor& x, int axis, const std::vector<long>& sizes) {
    normalize_axis(axis, x.rank(), "split");
    long total = 0;
    for (long s : sizes) {
        if (s < 1) throw DimensionError("split: part sizes must be positive");
        total += s;
    }
    if (total != x.extent(axis))
        throw DimensionError("split: sizes sum to " + std::to_string(total) + " but axis " +
                             std::to_string(axis) + " of " + x.shape_str() + " has " +
                             std::to_string(x.extent(axis)));
    std::vector<Tensor> parts;
    long start = 0;
    for (long s : sizes) {
        parts.push_back(slice(x, axis, start, s));
        start += s;
    }
    return parts;
}

Tensor reshape(const Tensor& x, std::vector<long> shape) {
    Tensor out = x.reshaped(shape);
    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    const std::vector<long> xshape = x.shape();
    int node = tape->record(out.shape(), [xn, xshape](const Tensor& g, Tape& tp) {
        tp.accumulate(xn, g.reshaped(xshape));
    });
    return tape->bind(std::move(out), node);
}

namespace {

Tensor permute_raw(const Tensor& x, const std::vector<int>& axes) {
    const int rank = x.rank();
    std::vector<long> oshape(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d)
        oshape[static_cast<std::size_t>(d)] = x.extent(axes[static_cast<std::size_t>(d)]);
    Tensor out(oshape);
    std::vector<long> xstrides(static_cast<std::size_t>(rank));
    long acc = 1;
    for (int d = rank - 1; d >= 0; --d) {
        xstrides[static_cast<std::size_t>(d)] = acc;
        acc *= x.extent(d);
    }
    std::vector<long> step(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d)
        step[static_cast<std::size_t>(d)] = xstrides[static_cast<std::size_t>(axes[static_cast<std::size_t>(d)])];
    std::vector<long> idx(static_cast<std::size_t>(rank), 0);
    const real* px = x.data();
    real* po = out.data();
    const long n = out.size();
    long ox = 0;
    for (long o = 0; o < n; ++o) {
        po[o] = px[ox];
        for (int d = rank - 1; d >= 0; --d) {
            auto du = static_cast<std::size_t>(d);
            if (++idx[du] < oshape[du]) {
                ox += step[du];
                break;
            }
            idx[du] = 0;
            ox -= step[du] * (oshape[du] - 1);
        }
    }
    return out;
}

} // namespace

Tensor permute(const Tensor& x, const std::vector<int>& axes) {
    const int rank = x.rank();
    if (static_cast<int>(axes.size()) != rank)
        throw DimensionError("permute: " + std::to_string(axes.size()) + " axes for rank " +
                             std::to_string(rank));
    std::vector<bool> seen(static_cast<std::size_t>(rank), false);
    for (int a : axes) {
        normalize_axis(a, rank, "permute");
        if (seen[static_cast<std::size_t>(a)]) throw DimensionError("permute: repeated axis " + std::to_string(a));
        seen[static_cast<std::size_t>(a)] = true;
    }
    bool identity = true;
    for (int d = 0; d < rank; ++d)
        if (axes[static_cast<std::size_t>(d)] != d) identity = false;
    if (identity) return x;

    Tensor out = permute_raw(x, axes);
    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    std::vector<int> inverse(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d) inverse[static_cast<std::size_t>(axes[static_cast<std::size_t>(d)])] = d;
    int node = tape->record(out.shape(), [xn, inverse](const Tensor& g, Tape& tp) {
        tp.accumulate(xn, permute_raw(g, inverse));
    });
    return tape->bind(std::move(out), node);
}

Tensor gather_rows(const Tensor& table, const std::vector<long>& rows) {
    if (table.rank() != 2) throw DimensionError("gather_rows: table must be rank 2, got " + table.shape_str());
    if (rows.empty()) throw ContractError("gather_rows: no row indices");
    const long nrows = table.extent(0);
    const long width = table.extent(1);
    for (long r : rows)
        if (r < 0 || r >= nrows)
            throw BoundsError("gather_rows: row " + std::to_string(r) + " outside table with " +
                              std::to_string(nrows) + " rows");
    Tensor out({static_cast<long>(rows.size()), width});
    const real* pt = table.data();
    real* po = out.data();
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(pt + rows[i] * width, width, po + static_cast<long>(i) * width);

    Tape* tape = table.tape();
    if (!tape) return out;
    const int tn = table.node();
    const std::vector<long> tshape = table.shape();
    int node = tape->record(out.shape(), [tn, tshape, rows, width](const Tensor& g, Tape& tp) {
        Tensor gt = Tensor::zeros(tshape);
        const real* pg = g.data();
        real* po = gt.data();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            real* dst = po + rows[i] * width;
            const real* src = pg + static_cast<long>(i) * width;
            for (long j = 0; j < width; ++j) dst[j] += src[j];
        }
        tp.accumulate(tn, gt);
    });
    return tape->bind(std::move(out), node);
}

Tensor scale(const Tensor& x, real c) {
    Tensor out = unary_raw(x, [c](real v) { return v * c; });
    return bind_unary(std::move(out), x, [c](real, real) { return c; });
}

Tensor shift(const Tensor& x, real c) {
    Tensor out = unary_raw(x, [c](real v) { return v + c; });
    return bind_unary(std::move(out), x, [](real, real) { return static_cast<real>(1); });
}

Tensor neg(const Tensor& x) { return scale(x, -1); }

Tensor expand(const Tensor& x, const std::vector<long>& shape) {
    Tensor out = broadcast_to_raw(x, shape);
    Tape* tape = x.tape();
    if (!tape) return out;
    const int xn = x.node();
    const std::vector<long> xshape = x.shape();
    int node = tape->record(out.shape(), [xn, xshape](const Tensor& g, Tape& tp) {
        tp.accumulate(xn, reduce_to_shape_raw(g, xshape));
    });
    return tape->bind(std::move(out), node);
}

} // namespace teddn::ops
