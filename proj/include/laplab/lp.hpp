#pragma once

#include <Eigen/Dense>

namespace laplab::lp
{
    // min c'x  subject to  A x = b,  x >= 0.
    struct StandardForm
    {
        Eigen::MatrixXd A;
        Eigen::VectorXd b;
        Eigen::VectorXd c;
    };

    enum class Status
    {
        optimal,
        infeasible,
        unbounded,
    };

    struct Solution
    {
        Status status = Status::infeasible;
        Eigen::VectorXd x;
        double objective = 0.0;
    };

    // Dense two-phase tableau simplex with Bland's anti-cycling rule. Intended for
    // problems with a few dozen variables at most.
    Solution solve(const StandardForm& problem, double tol = 1e-9);
}
