#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivdnet/metrics.hpp"

namespace ivdnet::report {

// Evaluation files ---------------------------------------------------------

/// One row per subject: subject,dsc,mean_distance,matched,misses,
/// false_positives,reference_discs,predicted_discs. NaN distances are
/// written as "nan".
void write_evaluation_csv(const std::filesystem::path& path,
                          std::span<const metrics::EvalReport> reports);

/// Per-subject reports (including every matched pair) plus the aggregate,
/// each aggregate value carrying a "mean ± std" string.
nlohmann::json evaluation_json(std::span<const metrics::EvalReport> reports);
void write_evaluation_json(const std::filesystem::path& path,
                           std::span<const metrics::EvalReport> reports);
std::vector<metrics::EvalReport> read_evaluation_json(const std::filesystem::path& path);

// Method comparison --------------------------------------------------------

struct ComparisonRow {
  std::string method;
  metrics::Aggregate aggregate;
};

/// Markdown table: Method | DSC | Localization (voxels) | Misses | False positives.
std::string comparison_markdown(std::span<const ComparisonRow> rows);
std::string comparison_csv(std::span<const ComparisonRow> rows);

// Training curves ----------------------------------------------------------

struct CurveSeries {
  std::string name;
  std::vector<double> epochs;
  std::vector<double> train_loss;
  std::vector<double> val_dsc;  // may hold NaN
};

/// Two-panel SVG: training loss (left) and validation DSC (right) per epoch.
std::string loss_curves_svg(std::span<const CurveSeries> series);

// Overlays -----------------------------------------------------------------

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  std::uint8_t* at(int y, int x) { return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x); }
  const std::uint8_t* at(int y, int x) const {
    return pixels.data() + 3 * (static_cast<std::size_t>(y) * width + x);
  }
};

/// Grey-level slice (values clamped to [0, 1]) with the reference mask
/// blended in red and the outline of the predicted mask drawn in blue.
RgbImage render_overlay(std::span<const float> image, std::span<const std::uint8_t> reference,
                        std::span<const std::uint8_t> prediction, int height, int width);

/// Places images side by side on a black background, `gap` pixels apart.
RgbImage tile_horizontal(std::span<const RgbImage> images, int gap = 4);

void write_png(const std::filesystem::path& path, const RgbImage& image);

}  // namespace ivdnet::report
