#pragma once

// Reconstruction scoring: confusion counts, precision/recall/dice, filling
// curves, method comparison reports, profiles and SVG curve plots.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ulm/common.hpp"
#include "ulm/vasculature.hpp"

namespace ulm {

struct ConfusionCounts {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    std::int64_t total() const { return tp + fp + fn + tn; }
    bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion_counts(const BinaryImage& prediction, const BinaryImage& truth);

// A metric with an empty denominator is left unset and excluded downstream.
struct MetricReport {
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> dice;
    ConfusionCounts counts;
    std::string provenance;  // how the prediction was binarized
};

MetricReport metrics(const ConfusionCounts& c, std::string provenance = "count > 0");

double dice_score(const BinaryImage& a, const BinaryImage& b);

// Pixelwise OR of per-block track masks.
BinaryImage ground_truth_angiogram(const std::vector<BinaryImage>& block_masks);
BinaryImage ground_truth_angiogram(const std::vector<std::vector<Trajectory>>& block_trajectories,
                                   const BlockGeometry& geom, const Placement& placement, int r);

struct FillingPoint {
    int blocks = 0;
    double dice = 0;
};

// Dice between the OR of the first N_b masks and the reference, per checkpoint.
std::vector<FillingPoint> network_filling_curve(const std::vector<BinaryImage>& block_masks,
                                                const BinaryImage& reference, const std::vector<int>& checkpoints);

struct MethodRow {
    double density = 0;
    std::string method;
    MetricReport report;
};

struct NamedMask {
    std::string method;
    BinaryImage mask;
};

std::vector<MethodRow> compare_methods(double density, const std::vector<NamedMask>& methods, const BinaryImage& reference);

// density,method,precision,recall,dice in percent; undefined metrics print as NA.
void write_report_csv(std::ostream& os, const std::vector<MethodRow>& rows);

struct FillingSeries {
    std::string label;
    std::vector<FillingPoint> points;
};

// blocks,<label>,... with one row per checkpoint.
void write_filling_csv(std::ostream& os, const std::vector<FillingSeries>& series);

// row,column,<a_label>,<b_label>
void write_line_profiles(std::ostream& os, const Image2D<int>& a, const Image2D<int>& b, int row,
                         const std::string& a_label, const std::string& b_label);

// Full width at half maximum around the global peak, with linear
// interpolation at the crossings; unset when a side never drops below half.
std::optional<double> fwhm(const std::vector<double>& profile);

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

void write_svg_plot(const std::filesystem::path& path, const std::string& title, const std::string& x_label,
                    const std::string& y_label, const std::vector<PlotSeries>& series);

}  // namespace ulm
