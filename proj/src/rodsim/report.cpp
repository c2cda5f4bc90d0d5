#include "report.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace rodsim {

std::optional<double> dominant_frequency(const std::vector<double>& times,
                                         const std::vector<double>& series) {
    if (series.size() < 3) return std::nullopt;
    const double mean = std::accumulate(series.begin(), series.end(), 0.0) / series.size();
    std::vector<double> crossings;
    for (size_t i = 1; i < series.size(); ++i) {
        const double a = series[i - 1] - mean, b = series[i] - mean;
        if (a == 0.0 && b == 0.0) continue;
        if ((a < 0.0 && b >= 0.0) || (a > 0.0 && b <= 0.0)) {
            const double frac = a / (a - b);
            crossings.push_back(times[i - 1] + frac * (times[i] - times[i - 1]));
        }
    }
    if (crossings.size() < 2) return std::nullopt;
    const double span = crossings.back() - crossings.front();
    if (span <= 0.0) return std::nullopt;
    const double half_period = span / static_cast<double>(crossings.size() - 1);
    return 1.0 / (2.0 * half_period);
}

double equilibrium_value(const std::vector<double>& series) {
    if (series.empty()) return 0.0;
    const size_t start = series.size() - std::max<size_t>(1, series.size() / 10);
    double sum = 0.0;
    for (size_t i = start; i < series.size(); ++i) sum += series[i];
    return sum / static_cast<double>(series.size() - start);
}

SeriesMetrics compare_series(const std::vector<double>& times, const std::vector<double>& got,
                             const std::vector<double>& want) {
    if (times.size() != got.size() || got.size() != want.size())
        throw std::invalid_argument("series grids do not match");
    SeriesMetrics m;
    double sq = 0.0;
    for (size_t i = 0; i < got.size(); ++i) {
        const double e = got[i] - want[i];
        m.max_err = std::max(m.max_err, std::abs(e));
        sq += e * e;
    }
    m.rms_err = got.empty() ? 0.0 : std::sqrt(sq / got.size());
    m.frequency = dominant_frequency(times, got);
    m.equilibrium = equilibrium_value(got);
    return m;
}

std::string format_report(const std::string& title, const SeriesMetrics& m) {
    std::ostringstream os;
    os << title << "\n";
    os << "  max error    " << m.max_err << "\n";
    os << "  rms error    " << m.rms_err << "\n";
    if (m.frequency)
        os << "  frequency    " << *m.frequency << " Hz\n";
    else
        os << "  frequency    (none)\n";
    os << "  equilibrium  " << m.equilibrium << "\n";
    return os.str();
}

}  // namespace rodsim
