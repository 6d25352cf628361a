#pragma once

#include <string>
#include <vector>

namespace oorp {

// Dense LP in the canonical form used throughout this project:
//   maximize c.x  subject to  A x <= b,  x >= 0.
struct LinearProgram {
    int num_vars = 0;
    std::vector<double> objective;         // size num_vars
    std::vector<std::vector<double>> rows; // each of size num_vars
    std::vector<double> rhs;               // one per row

    void add_row(std::vector<double> row, double b);
    void check() const; // dimension + finiteness sanity
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    double objective = 0.0;
    std::vector<double> x;
};

std::string to_string(LpStatus s);

// Two-phase tableau simplex with Bland's rule. Instances here are tiny
// (tens of variables), so determinism and simplicity win over speed.
LpSolution lp_solve(const LinearProgram& lp);

} // namespace oorp
