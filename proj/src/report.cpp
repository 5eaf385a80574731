#include "ivdnet/report.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "ivdnet/error.hpp"

namespace ivdnet::report {

namespace fs = std::filesystem;

namespace {

std::string number(double v, const char* fmt = "%.6g") {
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

nlohmann::json nullable(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }

double from_nullable(const nlohmann::json& v) {
  return v.is_null() ? std::numeric_limits<double>::quiet_NaN() : v.get<double>();
}

nlohmann::json summary(const metrics::MeanStd& m) {
  return {{"mean", nullable(m.mean)},
          {"std", nullable(m.std)},
          {"count", m.count},
          {"formatted", metrics::format_mean_std(m)}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out || !(out << text)) throw IoError(path.string(), "cannot write");
}

}  // namespace

void write_evaluation_csv(const fs::path& path, std::span<const metrics::EvalReport> reports) {
  std::ostringstream out;
  out << "subject,dsc,mean_distance,matched,misses,false_positives,reference_discs,predicted_discs\n";
  for (const auto& r : reports) {
    const auto& l = r.localization;
    out << r.subject << ',' << number(r.dsc, "%.10g") << ',' << number(l.mean_distance, "%.10g") << ','
        << r.matched() << ',' << l.misses << ',' << l.false_positives << ',' << l.reference_count << ','
        << l.automatic_count << '\n';
  }
  write_text(path, out.str());
}

nlohmann::json evaluation_json(std::span<const metrics::EvalReport> reports) {
  nlohmann::json subjects = nlohmann::json::array();
  for (const auto& r : reports) {
    const auto& l = r.localization;
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : l.pairs)
      pairs.push_back({{"reference", p.ref_component}, {"predicted", p.auto_component}, {"distance", p.distance}});
    subjects.push_back({{"subject", r.subject},
                        {"dsc", r.dsc},
                        {"mean_distance", nullable(l.mean_distance)},
                        {"matched", r.matched()},
                        {"misses", l.misses},
                        {"false_positives", l.false_positives},
                        {"reference_discs", l.reference_count},
                        {"predicted_discs", l.automatic_count},
                        {"pairs", pairs}});
  }
  const auto a = metrics::aggregate(reports);
  return {{"subjects", subjects},
          {"aggregate",
           {{"dsc", summary(a.dsc)},
            {"distance", summary(a.distance)},
            {"pair_distance", summary(a.pair_distance)},
            {"misses", a.misses},
            {"false_positives", a.false_positives}}}};
}

void write_evaluation_json(const fs::path& path, std::span<const metrics::EvalReport> reports) {
  write_text(path, evaluation_json(reports).dump(2) + "\n");
}

std::vector<metrics::EvalReport> read_evaluation_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open evaluation");
  std::vector<metrics::EvalReport> reports;
  try {
    const auto doc = nlohmann::json::parse(in);
    for (const auto& s : doc.at("subjects")) {
      metrics::EvalReport r;
      r.subject = s.at("subject").get<std::string>();
      r.dsc = s.at("dsc").get<double>();
      auto& l = r.localization;
      l.mean_distance = from_nullable(s.at("mean_distance"));
      l.misses = s.at("misses").get<int>();
      l.false_positives = s.at("false_positives").get<int>();
      l.reference_count = s.at("reference_discs").get<int>();
      l.automatic_count = s.at("predicted_discs").get<int>();
      for (const auto& p : s.at("pairs"))
        l.pairs.push_back({p.at("reference").get<int>(), p.at("predicted").get<int>(), p.at("distance").get<double>()});
      reports.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(path.string(), std::string("malformed evaluation: ") + e.what());
  }
  return reports;
}

std::string comparison_markdown(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "| Method | DSC | Localization (voxels) | Misses | False positives |\n"
      << "|---|---|---|---|---|\n";
  for (const auto& r : rows)
    out << "| " << r.method << " | " << metrics::format_mean_std(r.aggregate.dsc) << " | "
        << metrics::format_mean_std(r.aggregate.distance, 2) << " | " << r.aggregate.misses << " | "
        << r.aggregate.false_positives << " |\n";
  return out.str();
}

std::string comparison_csv(std::span<const ComparisonRow> rows) {
  std::ostringstream out;
  out << "method,subjects,dsc_mean,dsc_std,distance_mean,distance_std,misses,false_positives\n";
  for (const auto& r : rows) {
    const auto& a = r.aggregate;
    out << r.method << ',' << a.dsc.count << ',' << number(a.dsc.mean, "%.10g") << ','
        << number(a.dsc.std, "%.10g") << ',' << number(a.distance.mean, "%.10g") << ','
        << number(a.distance.std, "%.10g") << ',' << a.misses << ',' << a.false_positives << '\n';
  }
  return out.str();
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

struct Panel {
  double left, top, width, height;
  double x0, x1, y0, y1;

  double px(double x) const { return left + (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return top + height - (y - y0) / (y1 - y0) * height; }
};

void draw_panel(std::ostringstream& svg, const Panel& p, const std::string& title,
                std::span<const CurveSeries> series, bool loss) {
  svg << "<rect x='" << p.left << "' y='" << p.top << "' width='" << p.width << "' height='" << p.height
      << "' fill='none' stroke='#444'/>\n";
  svg << "<text x='" << p.left + p.width / 2 << "' y='" << p.top - 10
      << "' text-anchor='middle' font-size='14'>" << title << "</text>\n";
  for (int i = 0; i <= 4; ++i) {
    const double y = p.y0 + (p.y1 - p.y0) * i / 4.0;
    const double x = p.x0 + (p.x1 - p.x0) * i / 4.0;
    svg << "<line x1='" << p.left << "' x2='" << p.left + p.width << "' y1='" << p.py(y) << "' y2='" << p.py(y)
        << "' stroke='#ddd'/>\n";
    svg << "<text x='" << p.left - 6 << "' y='" << p.py(y) + 4 << "' text-anchor='end' font-size='11'>"
        << number(y, "%.3g") << "</text>\n";
    svg << "<text x='" << p.px(x) << "' y='" << p.top + p.height + 16 << "' text-anchor='middle' font-size='11'>"
        << number(x, "%.0f") << "</text>\n";
  }
  svg << "<text x='" << p.left + p.width / 2 << "' y='" << p.top + p.height + 34
      << "' text-anchor='middle' font-size='12'>epoch</text>\n";

  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const auto& ys = loss ? s.train_loss : s.val_dsc;
    std::string points;
    for (std::size_t i = 0; i < s.epochs.size() && i < ys.size(); ++i) {
      if (std::isnan(ys[i])) continue;
      points += number(p.px(s.epochs[i]), "%.2f") + "," + number(p.py(ys[i]), "%.2f") + " ";
    }
    if (!points.empty())
      svg << "<polyline fill='none' stroke-width='1.5' stroke='" << kPalette[k % std::size(kPalette)]
          << "' points='" << points << "'/>\n";
  }
}

}  // namespace

std::string loss_curves_svg(std::span<const CurveSeries> series) {
  double x1 = 1.0, loss_max = 0.0;
  for (const auto& s : series) {
    for (double e : s.epochs) x1 = std::max(x1, e);
    for (double l : s.train_loss)
      if (std::isfinite(l)) loss_max = std::max(loss_max, l);
  }
  if (loss_max <= 0.0) loss_max = 1.0;

  const double w = 900, h = 380;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "' font-family='sans-serif'>\n<rect width='100%' height='100%' fill='white'/>\n";
  draw_panel(svg, {60, 40, 330, 260, 0, x1, 0, loss_max * 1.05}, "training loss", series, true);
  draw_panel(svg, {480, 40, 330, 260, 0, x1, 0, 1}, "validation DSC", series, false);

  for (std::size_t k = 0; k < series.size(); ++k) {
    const double y = 50 + 18.0 * static_cast<double>(k);
    svg << "<line x1='822' x2='842' y1='" << y << "' y2='" << y << "' stroke-width='3' stroke='"
        << kPalette[k % std::size(kPalette)] << "'/>\n";
    svg << "<text x='846' y='" << y + 4 << "' font-size='11'>" << series[k].name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

RgbImage render_overlay(std::span<const float> image, std::span<const std::uint8_t> reference,
                        std::span<const std::uint8_t> prediction, int height, int width) {
  const auto n = static_cast<std::size_t>(height) * width;
  if (height < 1 || width < 1 || image.size() != n || reference.size() != n || prediction.size() != n)
    throw ValidationError("overlay inputs must all hold height * width pixels");

  RgbImage out{height, width, std::vector<std::uint8_t>(3 * n)};
  auto inside = [&](int y, int x) {
    return y >= 0 && y < height && x >= 0 && x < width && prediction[static_cast<std::size_t>(y) * width + x];
  };
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const auto i = static_cast<std::size_t>(y) * width + x;
      const double g = 255.0 * std::clamp(static_cast<double>(image[i]), 0.0, 1.0);
      double rgb[3] = {g, g, g};
      if (reference[i]) {
        constexpr double alpha = 0.45;
        rgb[0] = (1 - alpha) * g + alpha * 255.0;
        rgb[1] = (1 - alpha) * g;
        rgb[2] = (1 - alpha) * g;
      }
      const bool edge = inside(y, x) && !(inside(y - 1, x) && inside(y + 1, x) && inside(y, x - 1) && inside(y, x + 1));
      if (edge) {
        rgb[0] = 40;
        rgb[1] = 140;
        rgb[2] = 255;
      }
      auto* px = out.at(y, x);
      for (int c = 0; c < 3; ++c) px[c] = static_cast<std::uint8_t>(std::lround(rgb[c]));
    }
  return out;
}

RgbImage tile_horizontal(std::span<const RgbImage> images, int gap) {
  RgbImage out;
  for (const auto& im : images) {
    out.height = std::max(out.height, im.height);
    out.width += im.width;
  }
  if (images.empty()) return out;
  out.width += gap * static_cast<int>(images.size() - 1);
  out.pixels.assign(3 * static_cast<std::size_t>(out.height) * out.width, 0);
  int x0 = 0;
  for (const auto& im : images) {
    for (int y = 0; y < im.height; ++y) std::copy_n(im.at(y, 0), 3 * im.width, out.at(y, x0));
    x0 += im.width + gap;
  }
  return out;
}

void write_png(const fs::path& path, const RgbImage& image) {
  if (image.height < 1 || image.width < 1) throw ValidationError("cannot write an empty image");
  std::FILE* file = std::fopen(path.c_str(), "wb");
  if (!file) throw IoError(path.string(), "cannot open for writing");
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, info ? &info : nullptr);
    std::fclose(file);
    throw IoError(path.string(), "PNG encoding failed");
  }
  png_init_io(png, file);
  png_set_IHDR(png, info, image.width, image.height, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < image.height; ++y) png_write_row(png, const_cast<png_bytep>(image.at(y, 0)));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fclose(file) != 0) throw IoError(path.string(), "cannot close");
}

}  // namespace ivdnet::report
