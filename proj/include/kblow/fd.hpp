#pragma once

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace kblow::fd {

// Fornberg weights: w[k][j] approximates the k-th derivative at x0 from values at nodes[j].
template <class R>
std::vector<std::vector<R>> weights(R x0, const std::vector<R>& nodes, int max_order);

// Banded derivative operators on a fixed (possibly nonuniform) grid. Interior rows are centred,
// rows near the ends use shifted stencils of the same width. R is the working precision.
template <class R>
class BasicDifferentiator {
public:
    BasicDifferentiator() = default;
    BasicDifferentiator(std::vector<R> grid, int width, int max_order);

    const std::vector<R>& grid() const { return x_; }
    int width() const { return width_; }
    int max_order() const { return max_order_; }
    std::size_t size() const { return x_.size(); }
    int first_index(std::size_t row) const { return first_[row]; }
    R weight(int order, std::size_t row, int j) const { return w_[order][row][j]; }

    std::vector<R> apply(int order, const std::vector<R>& u) const;

    template <class T>
    T apply_at(int order, std::size_t row, const std::vector<T>& u) const {
        T acc = T(0.0);
        const int f = first_[row];
        if (order == 0) {
            for (int j = 0; j < width_; ++j) acc = acc + u[f + j] * w_[order][row][j];
            return acc;
        }
        // differences against the centre node, so roundoff scales with the local variation of u
        for (int j = 0; j < width_; ++j) acc = acc + (u[f + j] - u[row]) * w_[order][row][j];
        return acc;
    }

private:
    std::vector<R> x_;
    int width_ = 0;
    int max_order_ = 0;
    std::vector<int> first_;
    std::vector<std::vector<std::vector<R>>> w_;  // [order][row][j]
};

using Differentiator = BasicDifferentiator<double>;

inline std::vector<std::vector<double>> weights(double x0, const std::vector<double>& nodes, int max_order) {
    return weights<double>(x0, nodes, max_order);
}


template <class R>
inline std::vector<std::vector<R>> weights(R x0, const std::vector<R>& nodes, int max_order) {
    const int n = static_cast<int>(nodes.size());
    std::vector<std::vector<R>> c(max_order + 1, std::vector<R>(n, R(0)));
    R c1 = 1, c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, max_order);
        R c2 = 1;
        const R c5 = c4;
        c4 = nodes[i] - x0;
        for (int j = 0; j < i; ++j) {
            const R c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

template <class R>
BasicDifferentiator<R>::BasicDifferentiator(std::vector<R> grid, int width, int max_order)
    : x_(std::move(grid)), width_(width), max_order_(max_order) {
    const int n = static_cast<int>(x_.size());
    if (width_ > n) throw std::invalid_argument("stencil wider than the grid");
    if (max_order_ >= width_) throw std::invalid_argument("stencil too narrow for the derivative order");
    first_.resize(n);
    w_.assign(max_order_ + 1, std::vector<std::vector<R>>(n));
    for (int i = 0; i < n; ++i) {
        int f = i - width_ / 2;
        f = std::clamp(f, 0, n - width_);
        first_[i] = f;
        std::vector<R> nodes(x_.begin() + f, x_.begin() + f + width_);
        auto w = weights<R>(x_[i], nodes, max_order_);
        // Derivative rows annihilate constants exactly; absorb the roundoff in the diagonal weight.
        for (int k = 1; k <= max_order_; ++k) {
            R sum = R(0);
            for (int j = 0; j < width_; ++j) sum += w[k][j];
            w[k][i - f] -= sum;
        }
        for (int k = 0; k <= max_order_; ++k) w_[k][i] = std::move(w[k]);
    }
}

template <class R>
std::vector<R> BasicDifferentiator<R>::apply(int order, const std::vector<R>& u) const {
    if (u.size() != x_.size()) throw std::invalid_argument("grid function has the wrong length");
    std::vector<R> r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) r[i] = apply_at(order, i, u);
    return r;
}

extern template class BasicDifferentiator<double>;

}  // namespace kblow::fd
