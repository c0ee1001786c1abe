#include "laplab/lp.hpp"

#include <limits>
#include <vector>

namespace laplab::lp
{
    namespace
    {
        struct Tableau
        {
            // Rows 0..m-1 are constraints, column n holds the right-hand side.
            Eigen::MatrixXd t;
            std::vector<int> basis;
            int m = 0;
            int n = 0;

            void pivot(int row, int col)
            {
                t.row(row) /= t(row, col);
                for (int r = 0; r < t.rows(); ++r)
                    if (r != row && t(r, col) != 0.0)
                        t.row(r) -= t(r, col) * t.row(row);
                basis[row] = col;
            }

            // Minimises the objective stored in row m (reduced costs) over columns
            // flagged as allowed. Returns false when unbounded.
            bool optimise(const std::vector<bool>& allowed, double tol)
            {
                for (;;)
                {
                    int enter = -1;
                    for (int j = 0; j < n; ++j)
                        if (allowed[j] && t(m, j) < -tol)
                        {
                            enter = j;
                            break;
                        }
                    if (enter < 0)
                        return true;
                    int leave = -1;
                    double best = std::numeric_limits<double>::infinity();
                    for (int r = 0; r < m; ++r)
                    {
                        if (t(r, enter) > tol)
                        {
                            double ratio = t(r, n) / t(r, enter);
                            if (ratio < best - tol || (ratio <= best + tol && leave >= 0 && basis[r] < basis[leave]))
                            {
                                best = ratio;
                                leave = r;
                            }
                        }
                    }
                    if (leave < 0)
                        return false;
                    pivot(leave, enter);
                }
            }

            void load_objective(const Eigen::VectorXd& cost)
            {
                t.row(m).setZero();
                t.row(m).head(cost.size()) = cost.transpose();
                for (int r = 0; r < m; ++r)
                    if (t(m, basis[r]) != 0.0)
                        t.row(m) -= t(m, basis[r]) * t.row(r);
            }
        };
    }

    Solution solve(const StandardForm& problem, double tol)
    {
        const int m = static_cast<int>(problem.A.rows());
        const int nv = static_cast<int>(problem.A.cols());
        const int n = nv + m; // structural + artificial columns

        Tableau tab;
        tab.m = m;
        tab.n = n;
        tab.t = Eigen::MatrixXd::Zero(m + 1, n + 1);
        tab.basis.resize(m);
        for (int r = 0; r < m; ++r)
        {
            const double sign = problem.b(r) < 0.0 ? -1.0 : 1.0;
            tab.t.row(r).head(nv) = sign * problem.A.row(r);
            tab.t(r, nv + r) = 1.0;
            tab.t(r, n) = sign * problem.b(r);
            tab.basis[r] = nv + r;
        }

        // Phase 1: minimise the sum of artificials.
        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n);
        phase1.tail(m).setOnes();
        tab.load_objective(phase1);
        std::vector<bool> all(n, true);
        tab.optimise(all, tol);
        Solution sol;
        if (-tab.t(m, n) > tol * std::max(1.0, problem.b.cwiseAbs().sum()))
        {
            sol.status = Status::infeasible;
            return sol;
        }

        // Drive remaining artificials out of the basis; rows where that is
        // impossible are redundant and stay with a zero artificial.
        for (int r = 0; r < m; ++r)
        {
            if (tab.basis[r] < nv)
                continue;
            for (int j = 0; j < nv; ++j)
                if (std::abs(tab.t(r, j)) > tol)
                {
                    tab.pivot(r, j);
                    break;
                }
        }

        // Phase 2 on structural columns only.
        std::vector<bool> structural(n, false);
        for (int j = 0; j < nv; ++j)
            structural[j] = true;
        Eigen::VectorXd cost = Eigen::VectorXd::Zero(n);
        cost.head(nv) = problem.c;
        tab.load_objective(cost);
        if (!tab.optimise(structural, tol))
        {
            sol.status = Status::unbounded;
            return sol;
        }

        sol.status = Status::optimal;
        sol.x = Eigen::VectorXd::Zero(nv);
        for (int r = 0; r < m; ++r)
            if (tab.basis[r] < nv)
                sol.x(tab.basis[r]) = tab.t(r, n);
        sol.objective = problem.c.dot(sol.x);
        return sol;
    }
}
