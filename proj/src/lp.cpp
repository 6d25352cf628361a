#include "oorp/lp.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace oorp {

namespace {
constexpr double kEps = 1e-9;
}

void LinearProgram::add_row(std::vector<double> row, double b) {
    if (static_cast<int>(row.size()) != num_vars)
        throw std::invalid_argument("LP row width mismatch");
    rows.push_back(std::move(row));
    rhs.push_back(b);
}

void LinearProgram::check() const {
    if (static_cast<int>(objective.size()) != num_vars)
        throw std::invalid_argument("LP objective width mismatch");
    if (rows.size() != rhs.size()) throw std::invalid_argument("LP rhs size mismatch");
    auto finite = [](double v) { return std::isfinite(v); };
    for (double v : objective)
        if (!finite(v)) throw std::invalid_argument("LP objective not finite");
    for (const auto& r : rows) {
        if (static_cast<int>(r.size()) != num_vars)
            throw std::invalid_argument("LP row width mismatch");
        for (double v : r)
            if (!finite(v)) throw std::invalid_argument("LP coefficient not finite");
    }
    for (double v : rhs)
        if (!finite(v)) throw std::invalid_argument("LP rhs not finite");
}

namespace {

// Tableau over columns [x(0..n) | slack(0..m) | artificial...], one row per
// constraint plus an objective row. Bland's rule (lowest eligible index in,
// lowest basic index out) guarantees termination.
class Tableau {
public:
    Tableau(const LinearProgram& lp) {
        n_ = lp.num_vars;
        m_ = static_cast<int>(lp.rows.size());
        // Rows with negative rhs are flipped so rhs >= 0; those need an
        // artificial variable because the flipped slack coefficient is -1.
        std::vector<int> art_rows;
        for (int i = 0; i < m_; ++i)
            if (lp.rhs[i] < 0) art_rows.push_back(i);
        na_ = static_cast<int>(art_rows.size());
        cols_ = n_ + m_ + na_;
        a_.assign(m_, std::vector<double>(cols_ + 1, 0.0));
        basis_.assign(m_, -1);

        int art = 0;
        for (int i = 0; i < m_; ++i) {
            double sign = lp.rhs[i] < 0 ? -1.0 : 1.0;
            for (int j = 0; j < n_; ++j) a_[i][j] = sign * lp.rows[i][j];
            a_[i][n_ + i] = sign; // slack
            a_[i][cols_] = sign * lp.rhs[i];
            if (lp.rhs[i] < 0) {
                a_[i][n_ + m_ + art] = 1.0;
                basis_[i] = n_ + m_ + art;
                ++art;
            } else {
                basis_[i] = n_ + i;
            }
        }
    }

    // Phase 1: maximize -(sum of artificials). Returns false if infeasible.
    bool phase1() {
        if (na_ == 0) return true;
        std::vector<double> cost(cols_, 0.0);
        for (int j = n_ + m_; j < cols_; ++j) cost[j] = -1.0;
        double value = run(cost, nullptr);
        if (value < -kEps) return false;
        // Pivot remaining artificials out of the basis (or drop redundant rows).
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < n_ + m_) continue;
            int col = -1;
            for (int j = 0; j < n_ + m_; ++j)
                if (std::fabs(a_[i][j]) > kEps) { col = j; break; }
            if (col >= 0) {
                pivot(i, col);
            } else {
                // Row is redundant; clear it so it can never bind.
                for (int j = 0; j <= cols_; ++j) a_[i][j] = 0.0;
                basis_[i] = -1;
            }
        }
        blocked_from_ = n_ + m_; // artificials may never re-enter
        return true;
    }

    // Phase 2 with the real objective. Returns status.
    LpStatus phase2(const LinearProgram& lp, LpSolution& out) {
        std::vector<double> cost(cols_, 0.0);
        for (int j = 0; j < n_; ++j) cost[j] = lp.objective[j];
        bool bounded = true;
        double value = run(cost, &bounded);
        if (!bounded) return LpStatus::Unbounded;
        out.x.assign(n_, 0.0);
        for (int i = 0; i < m_; ++i)
            if (basis_[i] >= 0 && basis_[i] < n_) out.x[basis_[i]] = a_[i][cols_];
        out.objective = value;
        return LpStatus::Optimal;
    }

private:
    // Runs simplex for the given column costs; returns the objective value.
    // If `bounded` is non-null it is set to false on an unbounded ray
    // (otherwise unboundedness cannot occur because phase-1 costs are <= 0).
    double run(const std::vector<double>& cost, bool* bounded) {
        // Reduced-cost row: z_j - c_j, kept implicitly via recomputation of
        // the dual multipliers would be slower to reason about; instead keep
        // an explicit objective row and pivot it along.
        obj_.assign(cols_ + 1, 0.0);
        for (int j = 0; j < cols_; ++j) obj_[j] = -cost[j];
        for (int i = 0; i < m_; ++i) {
            if (basis_[i] < 0) continue;
            double cb = cost[basis_[i]];
            if (cb == 0.0) continue;
            for (int j = 0; j <= cols_; ++j) obj_[j] += cb * a_[i][j];
        }
        for (;;) {
            int enter = -1;
            for (int j = 0; j < cols_; ++j) {
                if (j >= blocked_from_) break;
                if (obj_[j] < -kEps) { enter = j; break; } // Bland: lowest index
            }
            if (enter < 0) return obj_[cols_];
            int leave = -1;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (int i = 0; i < m_; ++i) {
                if (basis_[i] < 0 || a_[i][enter] <= kEps) continue;
                double ratio = a_[i][cols_] / a_[i][enter];
                if (ratio < best_ratio - kEps ||
                    (ratio < best_ratio + kEps && (leave < 0 || basis_[i] < basis_[leave]))) {
                    best_ratio = ratio;
                    leave = i;
                }
            }
            if (leave < 0) {
                if (bounded) *bounded = false;
                return obj_[cols_];
            }
            pivot(leave, enter);
            // Clear the entering column from the reduced-cost row.
            double coef = obj_[enter];
            if (std::fabs(coef) > 0) {
                for (int j = 0; j <= cols_; ++j) obj_[j] -= coef * a_[leave][j];
            }
        }
    }

    void pivot(int row, int col) {
        double inv = 1.0 / a_[row][col];
        for (int j = 0; j <= cols_; ++j) a_[row][j] *= inv;
        a_[row][col] = 1.0;
        for (int i = 0; i < m_; ++i) {
            if (i == row) continue;
            double f = a_[i][col];
            if (std::fabs(f) <= 0.0) continue;
            for (int j = 0; j <= cols_; ++j) a_[i][j] -= f * a_[row][j];
            a_[i][col] = 0.0;
        }
        basis_[row] = col;
    }

    int n_ = 0, m_ = 0, na_ = 0, cols_ = 0;
    int blocked_from_ = std::numeric_limits<int>::max();
    std::vector<std::vector<double>> a_;
    std::vector<double> obj_;
    std::vector<int> basis_;
};

} // namespace

std::string to_string(LpStatus s) {
    switch (s) {
        case LpStatus::Optimal: return "optimal";
        case LpStatus::Infeasible: return "infeasible";
        case LpStatus::Unbounded: return "unbounded";
    }
    return "?";
}

LpSolution lp_solve(const LinearProgram& lp) {
    lp.check();
    LpSolution out;
    Tableau tab(lp);
    if (!tab.phase1()) {
        out.status = LpStatus::Infeasible;
        return out;
    }
    out.status = tab.phase2(lp, out);
    return out;
}

} // namespace oorp
