#include "ips/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ips/error.hpp"

namespace ips {
namespace {

std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(ErrorCode::kSchemaViolation, "not a number: " + std::string(s));
  }
  return v;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot open " + path + " for writing");
  out << text;
  if (!out) throw Error(ErrorCode::kIoError, "write failed for " + path);
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::vector<TimedPosition> labels_of(std::span<const Example> examples) {
  std::vector<TimedPosition> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.emplace_back(e.t, e.label);
  return out;
}

struct Trained {
  ErrorReport self;
  Mlp model;
};

Trained train_and_report(const std::vector<Example>& train_set, const std::vector<Example>& test_set,
                         const GeneralizationConfig& config) {
  MlpConfig mlp = config.mlp;
  mlp.layer_sizes = MlpConfig::for_input(train_set.front().features.size(), config.hidden).layer_sizes;
  TrainResult result = train(std::span<const Example>(train_set), std::span<const Example>(test_set), mlp);
  const auto estimates = predict_stream(result.model, test_set);
  return {error_report(estimates, labels_of(test_set)), std::move(result.model)};
}

}  // namespace

double nearest_rank(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::kEmpty, "no values");
  const double n = static_cast<double>(sorted.size());
  // The small slack keeps p * n from rounding up past an exact integer.
  auto rank = static_cast<std::size_t>(std::ceil(p * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

ErrorReport report_from_errors(std::vector<double> errors) {
  if (errors.empty()) throw Error(ErrorCode::kEmpty, "no errors to report");
  std::sort(errors.begin(), errors.end());
  ErrorReport r;
  r.count = errors.size();
  const double n = static_cast<double>(r.count);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    if (i + 1 < errors.size() && errors[i + 1] == errors[i]) continue;
    r.cdf.emplace_back(errors[i], i + 1 == errors.size() ? 1.0 : static_cast<double>(i + 1) / n);
  }
  r.p50 = nearest_rank(errors, 0.50);
  r.p95 = nearest_rank(errors, 0.95);
  r.p99 = nearest_rank(errors, 0.99);
  r.mean = std::accumulate(errors.begin(), errors.end(), 0.0) / n;
  r.errors = std::move(errors);
  return r;
}

ErrorReport error_report(std::span<const TimedPosition> estimates,
                         std::span<const TimedPosition> labels) {
  if (estimates.size() != labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(estimates.size()) + " estimates vs " +
                                                std::to_string(labels.size()) + " labels");
  }
  if (estimates.empty()) throw Error(ErrorCode::kEmpty, "no estimates");
  std::vector<double> errors(estimates.size());
  for (std::size_t i = 0; i < estimates.size(); ++i) {
    if (std::abs(estimates[i].first - labels[i].first) > 1e-9) {
      throw Error(ErrorCode::kLengthMismatch, "timestamp mismatch at index " + std::to_string(i));
    }
    errors[i] = distance(estimates[i].second, labels[i].second);
  }
  return report_from_errors(std::move(errors));
}

bool meets_requirement(const ErrorReport& report, double threshold_m, double fraction) noexcept {
  if (report.errors.empty()) return false;
  return nearest_rank(report.errors, fraction) <= threshold_m;
}

std::vector<Example> frames_to_examples(std::span<const FusionFrame> frames,
                                        const FeatureLayout& layout, std::span<const Block> blocks) {
  std::vector<Example> out;
  out.reserve(frames.size());
  for (const FusionFrame& f : frames) {
    out.push_back({f.t_ref, select_features(f, layout, blocks), f.label});
  }
  return out;
}

GeneralizationReport run_generalization(std::span<const FusionFrame> train_a,
                                        std::span<const FusionFrame> test_a,
                                        const InstrumentedFrames& frames_b,
                                        const FeatureLayout& layout_a,
                                        const FeatureLayout& layout_b,
                                        const GeneralizationConfig& config) {
  if (!(layout_a == layout_b)) {
    throw Error(ErrorCode::kLayoutMismatch, "datasets use different feature layouts");
  }
  if (config.blocks.empty()) throw Error(ErrorCode::kInvalidConfig, "no feature blocks selected");
  if (train_a.empty()) throw Error(ErrorCode::kTooFewFrames, "empty training split");
  if (test_a.empty() || frames_b.size() == 0) {
    throw Error(ErrorCode::kTooFewFrames, "empty evaluation set");
  }

  std::vector<std::vector<Block>> selections{config.blocks};
  if (config.per_block) {
    for (Block b : config.blocks) selections.push_back({b});
  }
  std::vector<Trained> trained;
  for (const auto& blocks : selections) {
    trained.push_back(train_and_report(frames_to_examples(train_a, layout_a, blocks),
                                       frames_to_examples(test_a, layout_a, blocks), config));
  }

  GeneralizationReport report;
  report.b_accesses_before_evaluation = frames_b.accesses();
  std::vector<FusionFrame> b_frames;
  b_frames.reserve(frames_b.size());
  for (std::size_t i = 0; i < frames_b.size(); ++i) b_frames.push_back(frames_b[i]);

  for (std::size_t s = 0; s < selections.size(); ++s) {
    const auto examples = frames_to_examples(b_frames, layout_b, selections[s]);
    const ErrorReport transfer =
        error_report(predict_stream(trained[s].model, examples), labels_of(examples));
    if (s == 0) {
      report.self = trained[s].self;
      report.transfer = transfer;
    } else {
      report.per_block.push_back(
          {std::string(block_name(selections[s].front())), trained[s].self, transfer});
    }
  }
  return report;
}

std::string cdf_csv(std::span<const NamedReport> reports) {
  std::string out = "series,error_m,fraction\n";
  for (const auto& [name, report] : reports) {
    for (const auto& [e, f] : report.cdf) {
      out += name;
      out += ',';
      out += format_double(e);
      out += ',';
      out += format_double(f);
      out += '\n';
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> parse_cdf_csv(
    const std::string& text) {
  std::vector<std::pair<std::string, std::vector<std::pair<double, double>>>> out;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "series,error_m,fraction") {
    throw Error(ErrorCode::kSchemaViolation, "missing CSV header");
  }
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c2 = line.rfind(',');
    const auto c1 = line.rfind(',', c2 == std::string::npos || c2 == 0 ? 0 : c2 - 1);
    if (c2 == std::string::npos || c1 == std::string::npos || c1 == c2) {
      throw Error(ErrorCode::kSchemaViolation, "bad CSV row: " + line);
    }
    const std::string series = line.substr(0, c1);
    const double e = parse_double(std::string_view(line).substr(c1 + 1, c2 - c1 - 1));
    const double f = parse_double(std::string_view(line).substr(c2 + 1));
    auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return s.first == series; });
    if (it == out.end()) {
      out.push_back({series, {}});
      it = std::prev(out.end());
    }
    it->second.emplace_back(e, f);
  }
  return out;
}

std::string cdf_svg(std::span<const NamedReport> reports, const PlotOptions& options) {
  constexpr double kWidth = 800.0;
  constexpr double kHeight = 500.0;
  constexpr double kLeft = 70.0;
  constexpr double kRight = 200.0;
  constexpr double kTop = 40.0;
  constexpr double kBottom = 60.0;
  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;

  double max_e = 0.0;
  double min_pos = std::numeric_limits<double>::infinity();
  for (const auto& [name, r] : reports) {
    for (const auto& [e, f] : r.cdf) {
      max_e = std::max(max_e, e);
      if (e > 0.0) min_pos = std::min(min_pos, e);
    }
  }
  if (!(max_e > 0.0)) max_e = 1.0;
  double lo = 0.0;
  double hi = max_e;
  if (options.log_x) {
    if (!std::isfinite(min_pos)) min_pos = 1e-3;
    lo = std::floor(std::log10(min_pos));
    hi = std::ceil(std::log10(max_e));
    if (hi <= lo) hi = lo + 1.0;
  }
  auto sx = [&](double e) {
    double v = e;
    if (options.log_x) v = std::log10(std::max(e, std::pow(10.0, lo)));
    return kLeft + (v - lo) / (hi - lo) * plot_w;
  };
  auto sy = [&](double f) { return kTop + (1.0 - f) * plot_h; };
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" "
         "viewBox=\"0 0 800 500\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
      << xml_escape(options.title) << "</text>\n";
  svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double f = i / 5.0;
    svg << "<line x1=\"" << kLeft << "\" x2=\"" << kLeft + plot_w << "\" y1=\"" << num(sy(f))
        << "\" y2=\"" << num(sy(f)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << num(sy(f) + 4) << "\" text-anchor=\"end\">"
        << num(f) << "</text>\n";
  }
  const int ticks = options.log_x ? static_cast<int>(hi - lo) : 5;
  for (int i = 0; i <= ticks; ++i) {
    const double v = options.log_x ? std::pow(10.0, lo + i) : max_e * i / ticks;
    const double x = sx(v);
    svg << "<line x1=\"" << num(x) << "\" x2=\"" << num(x) << "\" y1=\"" << kTop << "\" y2=\""
        << kTop + plot_h << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << kTop + plot_h + 18
        << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
  }
  svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\">distance error [m]" << (options.log_x ? " (log)" : "")
      << "</text>\n";
  svg << "<text transform=\"translate(18," << kTop + plot_h / 2
      << ") rotate(-90)\" text-anchor=\"middle\">CDF</text>\n";

  std::size_t idx = 0;
  for (const auto& [name, r] : reports) {
    const char* color = kPalette[idx % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    double prev = 0.0;
    for (const auto& [e, f] : r.cdf) {
      svg << num(sx(e)) << ',' << num(sy(prev)) << ' ' << num(sx(e)) << ',' << num(sy(f)) << ' ';
      prev = f;
    }
    svg << "\"/>\n";
    const double ly = kTop + 10 + 18.0 * static_cast<double>(idx);
    svg << "<line x1=\"" << kLeft + plot_w + 12 << "\" x2=\"" << kLeft + plot_w + 36 << "\" y1=\""
        << ly << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w + 42 << "\" y=\"" << ly + 4 << "\">" << xml_escape(name)
        << "</text>\n";
    ++idx;
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot(std::span<const NamedReport> reports, const std::string& csv_path,
               const std::string& svg_path, const PlotOptions& options) {
  if (reports.empty()) throw Error(ErrorCode::kEmpty, "no reports to plot");
  write_text(csv_path, cdf_csv(reports));
  write_text(svg_path, cdf_svg(reports, options));
}

nlohmann::ordered_json report_to_json(const ErrorReport& report, bool include_errors) {
  nlohmann::ordered_json j{{"count", report.count}, {"mean_m", report.mean},
                           {"p50_m", report.p50},   {"p95_m", report.p95},
                           {"p99_m", report.p99},   {"meets_1m_99pct", meets_requirement(report)}};
  if (include_errors) j["errors_m"] = report.errors;
  return j;
}

nlohmann::ordered_json generalization_to_json(const GeneralizationReport& report) {
  nlohmann::ordered_json j{{"self", report_to_json(report.self)},
                           {"transfer", report_to_json(report.transfer)},
                           {"b_accesses_before_evaluation", report.b_accesses_before_evaluation}};
  nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
  for (const BlockReport& b : report.per_block) {
    blocks.push_back({{"block", b.name},
                      {"self", report_to_json(b.self)},
                      {"transfer", report_to_json(b.transfer)}});
  }
  j["per_block"] = blocks;
  return j;
}

}  // namespace ips
