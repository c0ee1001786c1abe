#include "laplab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "laplab/errors.hpp"

namespace laplab::stats
{
    double mean(const std::vector<double>& xs)
    {
        if (xs.empty())
            return 0.0;
        return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    }

    double sample_stddev(const std::vector<double>& xs)
    {
        if (xs.size() < 2)
            return 0.0;
        const double m = mean(xs);
        double ss = 0.0;
        for (double x : xs)
            ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }

    double median(std::vector<double> xs)
    {
        if (xs.empty())
            return 0.0;
        std::sort(xs.begin(), xs.end());
        const auto n = xs.size();
        return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    }

    double t_quantile(double p, int dof)
    {
        boost::math::students_t dist(static_cast<double>(dof));
        return boost::math::quantile(dist, p);
    }

    double ci_half_width(const std::vector<double>& xs, double confidence)
    {
        if (xs.size() < 2)
            throw InsufficientDataError("confidence interval needs at least two samples");
        const double t = t_quantile(0.5 + 0.5 * confidence, static_cast<int>(xs.size()) - 1);
        return t * sample_stddev(xs) / std::sqrt(static_cast<double>(xs.size()));
    }

    LinearFit least_squares(const std::vector<double>& x, const std::vector<double>& y)
    {
        const auto n = x.size();
        if (n < 2 || y.size() != n)
            throw DegenerateRegressionError("regression needs at least two paired points");
        const double mx = mean(x);
        const double my = mean(y);
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t k = 0; k < n; ++k)
        {
            sxx += (x[k] - mx) * (x[k] - mx);
            sxy += (x[k] - mx) * (y[k] - my);
        }
        if (!(sxx > 0.0))
            throw DegenerateRegressionError("regression abscissae are all equal");
        LinearFit fit;
        fit.slope = sxy / sxx;
        fit.intercept = my - fit.slope * mx;
        if (n > 2)
        {
            double sse = 0.0;
            for (std::size_t k = 0; k < n; ++k)
            {
                const double r = y[k] - fit.intercept - fit.slope * x[k];
                sse += r * r;
            }
            fit.slope_stderr = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
        }
        return fit;
    }
}
