#include "tilewall/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "tilewall/config.hpp"
#include "tilewall/interact/event.hpp"

namespace tw::bench {

using nlohmann::json;

namespace {

double median(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("median of no samples");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace

void validate(const Scenario& s) {
  if (s.name.empty()) throw std::invalid_argument("scenario needs a name");
  if (s.n_frames < s.warmup_frames + 3) {
    throw std::invalid_argument("scenario '" + s.name + "': n_frames must be >= warmup_frames + 3");
  }
  std::vector<std::string> problems;
  config::validate(s.config, problems);
  if (s.expect.oracle_tolerance && !s.config.throttle) {
    problems.push_back("oracle_tolerance needs a throttled config");
  }
  if (!problems.empty()) throw config::ConfigError(problems);
}

std::uint64_t FrameSample::bytes_total() const {
  return std::accumulate(bytes_per_link.begin(), bytes_per_link.end(), std::uint64_t{0});
}

std::span<const FrameSample> Measurement::measured() const {
  const std::size_t skip = std::min<std::size_t>(warmup_frames, frames.size());
  return std::span<const FrameSample>(frames).subspan(skip);
}

double Measurement::median_seconds() const {
  std::vector<double> t;
  for (const auto& f : measured()) t.push_back(f.seconds);
  return median(std::move(t));
}

double Measurement::median_bytes() const {
  std::vector<double> b;
  for (const auto& f : measured()) b.push_back(static_cast<double>(f.bytes_total()));
  return median(std::move(b));
}

double Measurement::mean_link_bytes() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& f : measured()) {
    for (auto b : f.bytes_per_link) {
      sum += static_cast<double>(b);
      ++n;
    }
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::uint64_t Measurement::max_geometry_bytes() const {
  std::uint64_t m = 0;
  for (const auto& f : measured()) m = std::max(m, f.geometry_bytes);
  return m;
}

Measurement run_scenario(const Scenario& s) {
  validate(s);
  Measurement m;
  m.scenario = s.name;
  m.label = s.label;
  m.bandwidth_bits_per_sec = s.config.throttle ? s.config.throttle->effective_bits_per_sec() : 0.0;
  m.c_render = s.config.render_cost_sec;
  m.warmup_frames = s.warmup_frames;

  const auto timeout = std::chrono::milliseconds(static_cast<long long>(s.config.watchdog_sec * 1000.0));
  auto record = [&](const cluster::JobFrame& f, wire::Clock::time_point t0) {
    FrameSample fs;
    fs.seconds = std::chrono::duration<double>(f.completed - t0).count();
    fs.bytes_per_link = f.traffic.bytes;
    fs.geometry_bytes = f.traffic.total_geometry();
    m.frames.push_back(std::move(fs));
  };

  auto t0 = wire::Clock::now();
  std::unique_ptr<cluster::LocalJob> job;
  if (s.config.scene.is_volume()) {
    job = std::make_unique<cluster::LocalJob>(s.config, cluster::build_volume(s.config.scene));
  } else {
    job = std::make_unique<cluster::LocalJob>(s.config, cluster::build_partitions(s.config.scene, s.config.app_nodes));
  }
  auto fail = [&](const std::string& what) {
    const auto diags = job->diagnostics();
    job->quit();
    std::string msg = "scenario '" + s.name + "': " + what;
    for (const auto& d : diags) msg += "; " + d;
    throw std::runtime_error(msg);
  };

  auto first = job->next_frame(timeout);
  if (!first) fail("initial frame did not complete");
  record(*first, t0);

  job->post(interact::pointer_down(interact::kButtonRotate, 0.0f, 0.0f));
  for (std::uint32_t k = 1; k < s.n_frames; ++k) {
    t0 = wire::Clock::now();
    job->post(interact::pointer_move(interact::kButtonRotate, s.step * static_cast<float>(k), 0.0f));
    auto f = job->next_frame(timeout);
    if (!f) fail("frame " + std::to_string(k) + " did not complete");
    record(*f, t0);
  }
  job->post(interact::pointer_up(interact::kButtonRotate));
  job->quit();
  if (job->aborted_frames() != 0) throw std::runtime_error("scenario '" + s.name + "': frames aborted");
  return m;
}

double ModelFit::max_abs_residual() const {
  double r = 0.0;
  for (double x : residuals) r = std::max(r, std::abs(x));
  return r;
}

ModelFit fit_model(std::span<const double> bytes, std::span<const double> seconds) {
  if (bytes.size() != seconds.size()) throw std::invalid_argument("fit_model: size mismatch");
  const double n = static_cast<double>(bytes.size());
  if (bytes.size() < 2) throw std::invalid_argument("fit_model: need at least two points");
  const double mx = std::accumulate(bytes.begin(), bytes.end(), 0.0) / n;
  const double my = std::accumulate(seconds.begin(), seconds.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    sxx += (bytes[i] - mx) * (bytes[i] - mx);
    sxy += (bytes[i] - mx) * (seconds[i] - my);
  }
  if (sxx <= 0.0) throw std::invalid_argument("fit_model: degenerate (all sizes equal)");
  const double slope = sxy / sxx;
  ModelFit fit;
  fit.c_render = my - slope * mx;
  fit.effective_bandwidth = slope > 0.0 ? 8.0 / slope : std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double predicted = fit.c_render + slope * bytes[i];
    fit.residuals.push_back((predicted - seconds[i]) / seconds[i]);
  }
  return fit;
}

ModelFit fit_model(std::span<const Measurement> ms) {
  std::vector<double> b, t;
  for (const auto& m : ms) {
    b.push_back(m.median_bytes());
    t.push_back(m.median_seconds());
  }
  return fit_model(b, t);
}

std::vector<SummaryCell> summarize(std::span<const Measurement> ms) {
  std::vector<SummaryCell> out;
  for (const auto& m : ms) {
    out.push_back({m.label.empty() ? m.scenario : m.label, m.bandwidth_bits_per_sec / 1e6, m.fps()});
  }
  return out;
}

std::string results_csv(std::span<const Measurement> ms) {
  std::size_t links = 0;
  for (const auto& m : ms) {
    for (const auto& f : m.frames) links = std::max(links, f.bytes_per_link.size());
  }
  std::ostringstream os;
  os << "scenario,frame,seconds,bytes_total,geometry_bytes";
  for (std::size_t i = 0; i < links; ++i) os << ",link" << i;
  os << '\n';
  for (const auto& m : ms) {
    for (std::size_t k = 0; k < m.frames.size(); ++k) {
      const auto& f = m.frames[k];
      os << m.scenario << ',' << k << ',' << fmt(f.seconds) << ',' << f.bytes_total() << ',' << f.geometry_bytes;
      for (std::size_t i = 0; i < links; ++i) {
        os << ',';
        if (i < f.bytes_per_link.size()) os << f.bytes_per_link[i];
      }
      os << '\n';
    }
  }
  return os.str();
}

std::string summary_csv(std::span<const SummaryCell> cells) {
  std::ostringstream os;
  os << "label,bandwidth_mbps,fps\n";
  for (const auto& c : cells) os << c.label << ',' << fmt(c.bandwidth_mbps) << ',' << fmt(c.fps) << '\n';
  return os.str();
}

std::string summary_table(std::span<const SummaryCell> cells) {
  std::vector<std::string> labels;
  std::vector<double> bws;
  std::map<std::pair<std::string, double>, double> fps;
  for (const auto& c : cells) {
    if (std::find(labels.begin(), labels.end(), c.label) == labels.end()) labels.push_back(c.label);
    if (std::find(bws.begin(), bws.end(), c.bandwidth_mbps) == bws.end()) bws.push_back(c.bandwidth_mbps);
    fps[{c.label, c.bandwidth_mbps}] = c.fps;
  }
  std::sort(bws.begin(), bws.end());
  std::ostringstream os;
  os << std::left << std::setw(20) << "scene";
  for (double b : bws) {
    std::ostringstream h;
    if (b > 0.0) {
      h << b << " Mbit/s";
    } else {
      h << "unthrottled";
    }
    os << std::right << std::setw(16) << h.str();
  }
  os << '\n';
  for (const auto& l : labels) {
    os << std::left << std::setw(20) << l;
    for (double b : bws) {
      auto it = fps.find({l, b});
      std::ostringstream v;
      if (it != fps.end()) {
        v << std::fixed << std::setprecision(2) << it->second;
      } else {
        v << "-";
      }
      os << std::right << std::setw(16) << v.str();
    }
    os << '\n';
  }
  return os.str();
}

void emit_results(std::span<const Measurement> ms, const std::filesystem::path& path) {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
    if (!out) throw std::runtime_error("cannot write " + p.string());
  };
  write(path, results_csv(ms));
  std::filesystem::path summary = path;
  summary.replace_extension(".summary.csv");
  std::vector<SummaryCell> cells;
  for (const auto& m : ms) {
    if (!m.measured().empty()) cells.push_back(summarize(std::span<const Measurement>(&m, 1)).front());
  }
  write(summary, summary_csv(cells));
}

std::vector<Measurement> parse_results_csv(const std::string& csv) {
  std::istringstream is(csv);
  std::string line;
  if (!std::getline(is, line)) throw std::invalid_argument("results CSV: missing header");
  const auto header = split(line, ',');
  if (header.size() < 5 || header[0] != "scenario" || header[1] != "frame" || header[2] != "seconds") {
    throw std::invalid_argument("results CSV: unexpected header");
  }
  const std::size_t links = header.size() - 5;
  std::vector<Measurement> out;
  std::size_t row = 1;
  while (std::getline(is, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    if (cols.size() != header.size()) {
      throw std::invalid_argument("results CSV: row " + std::to_string(row) + " has " + std::to_string(cols.size()) +
                                  " columns");
    }
    if (out.empty() || out.back().scenario != cols[0]) {
      out.emplace_back();
      out.back().scenario = cols[0];
    }
    FrameSample f;
    f.seconds = std::stod(cols[2]);
    f.geometry_bytes = std::stoull(cols[4]);
    for (std::size_t i = 0; i < links; ++i) {
      if (!cols[5 + i].empty()) f.bytes_per_link.push_back(std::stoull(cols[5 + i]));
    }
    if (f.bytes_total() != std::stoull(cols[3])) {
      throw std::invalid_argument("results CSV: row " + std::to_string(row) + " bytes_total mismatch");
    }
    out.back().frames.push_back(std::move(f));
  }
  return out;
}

std::vector<std::string> check(const Scenario& s, const Measurement& m) {
  std::vector<std::string> failures;
  if (s.expect.oracle_tolerance) {
    const double predicted = model_frame_seconds(s.config.render_cost_sec, m.median_bytes(),
                                                 s.config.throttle->effective_bits_per_sec());
    const double measured = m.median_seconds();
    const double rel = std::abs(measured - predicted) / predicted;
    if (rel > *s.expect.oracle_tolerance) {
      std::ostringstream os;
      os << s.name << ": frame time " << measured << " s vs model " << predicted << " s (off by " << rel * 100.0
         << "%)";
      failures.push_back(os.str());
    }
  }
  if (s.expect.max_geometry_bytes && m.max_geometry_bytes() > *s.expect.max_geometry_bytes) {
    failures.push_back(s.name + ": geometry bytes per frame " + std::to_string(m.max_geometry_bytes()) + " > " +
                       std::to_string(*s.expect.max_geometry_bytes));
  }
  return failures;
}

ScenarioFile parse_scenarios(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("scenario file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("scenarios") || !doc["scenarios"].is_array()) {
    throw std::invalid_argument("scenario file needs a 'scenarios' array");
  }
  const json defaults = doc.value("defaults", json::object());
  std::vector<std::string> problems;
  ScenarioFile file;
  std::size_t idx = 0;
  for (const json& entry : doc["scenarios"]) {
    const std::string where = "scenarios[" + std::to_string(idx++) + "]";
    if (!entry.is_object()) {
      problems.push_back(where + ": expected an object");
      continue;
    }
    Scenario s;
    s.name = entry.value("name", "");
    if (s.name.empty()) problems.push_back(where + ": missing name");
    s.label = entry.value("label", s.name);
    s.n_frames = entry.value("frames", s.n_frames);
    s.warmup_frames = entry.value("warmup", s.warmup_frames);
    s.step = entry.value("step", s.step);
    s.acceptance = entry.value("acceptance", false);
    json cfg = defaults;
    cfg.merge_patch(entry.value("config", json::object()));
    std::vector<std::string> cfg_problems;
    config::apply_json(cfg, s.config, cfg_problems);
    for (const auto& p : cfg_problems) problems.push_back(where + ".config." + p);
    if (entry.contains("expect")) {
      const json& e = entry["expect"];
      if (e.contains("oracle_tolerance")) s.expect.oracle_tolerance = e["oracle_tolerance"].get<double>();
      if (e.contains("max_geometry_bytes")) s.expect.max_geometry_bytes = e["max_geometry_bytes"].get<std::uint64_t>();
    }
    if (cfg_problems.empty()) {
      try {
        validate(s);
      } catch (const std::exception& ex) {
        problems.push_back(where + ": " + ex.what());
      }
    }
    file.scenarios.push_back(std::move(s));
  }
  if (!problems.empty()) throw config::ConfigError(problems);
  return file;
}

ScenarioFile load_scenarios(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenarios(ss.str());
}

}  // namespace tw::bench
