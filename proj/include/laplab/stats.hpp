#pragma once

#include <vector>

namespace laplab::stats
{
    double mean(const std::vector<double>& xs);
    double sample_stddev(const std::vector<double>& xs);
    double median(std::vector<double> xs);

    // Two-sided Student-t quantile, e.g. t_{0.975, dof}.
    double t_quantile(double p, int dof);

    // Half-width of the two-sided confidence interval for the mean.
    double ci_half_width(const std::vector<double>& xs, double confidence = 0.95);

    struct LinearFit
    {
        double slope = 0.0;
        double intercept = 0.0;
        double slope_stderr = 0.0;
    };

    // Ordinary least squares y = intercept + slope x.
    LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y);
}
