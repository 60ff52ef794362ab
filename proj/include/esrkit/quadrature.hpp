#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "esrkit/errors.hpp"

namespace esr {

// Adaptive Gauss-Kronrod 7-15 on [a, b].  Bisects intervals whose embedded
// error estimate exceeds the local share of the tolerance; depth-first with
// an explicit stack, deterministic.

namespace gk {

// QUADPACK dqk15 abscissae (positive half) and weights
inline constexpr double xgk[8] = {
    0.991455371120813, 0.949107912342759, 0.864864423359769, 0.741531185599394,
    0.586087235467691, 0.405845151377397, 0.207784955007898, 0.0};
inline constexpr double wgk[8] = {
    0.022935322010529, 0.063092092629979, 0.104790010322250, 0.140653259715525,
    0.169004726639267, 0.190350578064785, 0.204432940075298, 0.209482141084728};
inline constexpr double wg[4] = {
    0.129484966168870, 0.279705391489277, 0.381830050505119, 0.417959183673469};

}  // namespace gk

template <typename F>
struct QuadResult {
    F value{};
    double error = 0.0;
};

template <typename Func>
auto gk15(const Func& f, double a, double b)
{
    using V = decltype(f(a));
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const V fc = f(c);
    V kron = gk::wgk[7] * fc;
    V gauss = gk::wg[3] * fc;
    for (int j = 0; j < 7; ++j) {
        const double dx = h * gk::xgk[j];
        const V sum = f(c - dx) + f(c + dx);
        kron += gk::wgk[j] * sum;
        if (j % 2 == 1) gauss += gk::wg[j / 2] * sum;
    }
    kron *= h;
    gauss *= h;
    QuadResult<V> r;
    r.value = kron;
    using std::abs;
    r.error = abs(kron - gauss);
    return r;
}

// integrate f over [a, b]; rel/abs tolerance on the total
template <typename Func>
auto integrate(const Func& f, double a, double b, double rel_tol = 1e-10,
               double abs_tol = 0.0, int max_depth = 60)
{
    using V = decltype(f(a));
    struct Item {
        double a, b;
        V value;
        double error;
        int depth;
    };
    auto first = gk15(f, a, b);
    std::vector<Item> stack{{a, b, first.value, first.error, 0}};
    V total = first.value;
    double total_err = first.error;
    using std::abs;
    while (!stack.empty()) {
        const double tol = std::max(abs_tol, rel_tol * abs(total));
        if (total_err <= tol) break;
        // split the worst interval
        size_t worst = 0;
        for (size_t i = 1; i < stack.size(); ++i)
            if (stack[i].error > stack[worst].error) worst = i;
        Item it = stack[worst];
        stack.erase(stack.begin() + worst);
        if (it.depth >= max_depth)
            throw NumericError("adaptive quadrature: max subdivision depth reached");
        const double mid = 0.5 * (it.a + it.b);
        auto left = gk15(f, it.a, mid);
        auto right = gk15(f, mid, it.b);
        total += left.value + right.value - it.value;
        total_err += left.error + right.error - it.error;
        stack.push_back({it.a, mid, left.value, left.error, it.depth + 1});
        stack.push_back({mid, it.b, right.value, right.error, it.depth + 1});
    }
    return total;
}

// convenience: integrate across explicit breakpoints
template <typename Func>
auto integrate_segments(const Func& f, const std::vector<double>& pts,
                        double rel_tol = 1e-10, double abs_tol = 0.0)
{
    using V = decltype(f(pts.front()));
    V total{};
    for (size_t i = 0; i + 1 < pts.size(); ++i)
        total += integrate(f, pts[i], pts[i + 1], rel_tol, abs_tol);
    return total;
}

}  // namespace esr
