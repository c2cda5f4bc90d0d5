#pragma once

#include <optional>
#include <string>
#include <vector>

namespace rodsim {

struct SeriesMetrics {
    double max_err = 0.0;
    double rms_err = 0.0;
    std::optional<double> frequency;      // dominant frequency [Hz], none if flat
    double equilibrium = 0.0;             // mean of the last tenth of the series
};

// Per-series comparison on a shared time grid. Throws on mismatched grids.
SeriesMetrics compare_series(const std::vector<double>& times, const std::vector<double>& got,
                             const std::vector<double>& want);

// Dominant frequency from zero-crossing intervals of the mean-subtracted
// series; nullopt when there are too few crossings.
std::optional<double> dominant_frequency(const std::vector<double>& times,
                                         const std::vector<double>& series);

double equilibrium_value(const std::vector<double>& series);

std::string format_report(const std::string& title, const SeriesMetrics& m);

}  // namespace rodsim
