#ifndef SLBP_FIELD_HPP
#define SLBP_FIELD_HPP

// Time-stamped real-valued function on a periodic site grid (densities and
// test functions share this container).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace slbp {

struct DensityField {
    std::vector<double> values;
    double time = 0.0;

    DensityField() = default;
    DensityField(int K, double v, double t = 0.0) : values(size_t(K), v), time(t) {}
    DensityField(std::vector<double> v, double t = 0.0) : values(std::move(v)), time(t) {}

    int K() const { return int(values.size()); }
    double max_abs() const {
        double m = 0.0;
        for (double v : values) m = std::max(m, std::abs(v));
        return m;
    }
    double mean() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / double(values.size());
    }
};

// Piecewise-linear-in-time view of a field trajectory stored at solver steps.
struct DensityPath {
    std::vector<double> times;               // strictly increasing
    std::vector<std::vector<double>> values; // one field per time

    int K() const { return values.empty() ? 0 : int(values.front().size()); }
    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }

    DensityField at(double t) const {
        if (times.empty()) throw std::runtime_error("DensityPath: empty path");
        if (t <= times.front()) return DensityField(values.front(), times.front());
        if (t >= times.back()) return DensityField(values.back(), times.back());
        auto it = std::upper_bound(times.begin(), times.end(), t);
        size_t i = size_t(it - times.begin());
        double t0 = times[i - 1], t1 = times[i];
        double w = (t - t0) / (t1 - t0);
        std::vector<double> out(values[i - 1].size());
        for (size_t z = 0; z < out.size(); ++z)
            out[z] = (1.0 - w) * values[i - 1][z] + w * values[i][z];
        return DensityField(std::move(out), t);
    }

    // Interpolate into a caller-owned buffer (no allocation when the buffer
    // already has the right size); hot path for time-dependent functionals.
    void eval_into(double t, std::vector<double>& out) const {
        if (times.empty()) throw std::runtime_error("DensityPath: empty path");
        const std::vector<double>* lo;
        const std::vector<double>* hi;
        double w;
        if (t <= times.front()) {
            lo = hi = &values.front();
            w = 0.0;
        } else if (t >= times.back()) {
            lo = hi = &values.back();
            w = 0.0;
        } else {
            auto it = std::upper_bound(times.begin(), times.end(), t);
            size_t i = size_t(it - times.begin());
            lo = &values[i - 1];
            hi = &values[i];
            w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        }
        out.resize(lo->size());
        for (size_t z = 0; z < out.size(); ++z)
            out[z] = (1.0 - w) * (*lo)[z] + w * (*hi)[z];
    }
};

} // namespace slbp

#endif // SLBP_FIELD_HPP
