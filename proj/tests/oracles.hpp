#pragma once

// Test-only oracles, kept independent of the implementation paths they check.

#include <cmath>
#include <optional>
#include <vector>

#include "oorp/lp.hpp"
#include "oorp/rng.hpp"

namespace oorp::testing {

// Brute-force LP optimum by enumerating candidate vertices: every choice of
// n active hyperplanes among the constraint rows and the nonnegativity
// bounds. Assumes the feasible region is bounded (add a box row when
// generating instances). Returns nullopt when no feasible vertex exists.
inline std::optional<double> vertex_enum_optimum(const LinearProgram& lp,
                                                 std::vector<double>* argbest = nullptr) {
    const int n = lp.num_vars;
    const int m = static_cast<int>(lp.rows.size());
    const int total = m + n;
    std::vector<int> pick(n);
    std::optional<double> best;

    // Solve the n x n system for the active set; Gaussian elimination with
    // partial pivoting.
    auto try_active_set = [&](const std::vector<int>& active) {
        std::vector<std::vector<double>> a(n, std::vector<double>(n + 1, 0.0));
        for (int r = 0; r < n; ++r) {
            int id = active[r];
            if (id < m) {
                for (int j = 0; j < n; ++j) a[r][j] = lp.rows[id][j];
                a[r][n] = lp.rhs[id];
            } else {
                a[r][id - m] = 1.0;
                a[r][n] = 0.0;
            }
        }
        for (int col = 0; col < n; ++col) {
            int piv = -1;
            double mag = 1e-9;
            for (int r = col; r < n; ++r)
                if (std::fabs(a[r][col]) > mag) {
                    mag = std::fabs(a[r][col]);
                    piv = r;
                }
            if (piv < 0) return;
            std::swap(a[col], a[piv]);
            for (int r = 0; r < n; ++r) {
                if (r == col) continue;
                double f = a[r][col] / a[col][col];
                if (f == 0.0) continue;
                for (int j = col; j <= n; ++j) a[r][j] -= f * a[col][j];
            }
        }
        std::vector<double> x(n);
        for (int j = 0; j < n; ++j) x[j] = a[j][n] / a[j][j];
        for (int j = 0; j < n; ++j)
            if (x[j] < -1e-7) return;
        for (int r = 0; r < m; ++r) {
            double lhs = 0.0;
            for (int j = 0; j < n; ++j) lhs += lp.rows[r][j] * x[j];
            if (lhs > lp.rhs[r] + 1e-7) return;
        }
        double obj = 0.0;
        for (int j = 0; j < n; ++j) obj += lp.objective[j] * x[j];
        if (!best || obj > *best) {
            best = obj;
            if (argbest) *argbest = x;
        }
    };

    // Enumerate n-subsets of [0, total).
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    for (;;) {
        try_active_set(idx);
        int i = n - 1;
        while (i >= 0 && idx[i] == total - n + i) --i;
        if (i < 0) break;
        ++idx[i];
        for (int j = i + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
    }
    return best;
}

// Random bounded LP: up to `max_vars` variables, up to `max_rows` rows
// including one box row that keeps the region bounded.
inline LinearProgram random_bounded_lp(Rng& rng, int max_vars = 6, int max_rows = 8) {
    LinearProgram lp;
    lp.num_vars = 1 + static_cast<int>(rng.next_u64() % max_vars);
    int extra = static_cast<int>(rng.next_u64() % (max_rows - 1));
    lp.objective.resize(lp.num_vars);
    for (double& c : lp.objective) c = std::floor(rng.next_double() * 21.0) - 10.0;
    for (int r = 0; r < extra; ++r) {
        std::vector<double> row(lp.num_vars);
        for (double& v : row) v = std::floor(rng.next_double() * 11.0) - 5.0;
        double b = std::floor(rng.next_double() * 25.0) - 5.0;
        lp.add_row(std::move(row), b);
    }
    std::vector<double> box(lp.num_vars, 1.0);
    lp.add_row(std::move(box), 10.0 + std::floor(rng.next_double() * 10.0));
    return lp;
}

// Golden-section maximum of a unimodal function on [lo, hi].
template <typename F>
double golden_section_max(F&& f, double lo, double hi, double tol = 1e-12) {
    const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > tol) {
        if (f1 < f2) {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        }
    }
    return (a + b) / 2.0;
}

} // namespace oorp::testing
