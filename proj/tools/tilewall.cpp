// tilewall: launcher for every role of a tiled-display rendering job.

#include <spdlog/spdlog.h>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <thread>

#include "CLI11.hpp"
#include "tilewall/bench.hpp"
#include "tilewall/cluster/app_node.hpp"
#include "tilewall/cluster/job.hpp"
#include "tilewall/cluster/tile_server.hpp"
#include "tilewall/config.hpp"
#include "tilewall/interact/master.hpp"
#include "tilewall/interact/script.hpp"
#include "tilewall/interact/ui_push.hpp"
#include "tilewall/wire/codec.hpp"

namespace fs = std::filesystem;
using namespace tw;

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

struct Common {
  std::string config_path;
  bool verbose = false;
};

cluster::JobConfig load_config(const Common& c) {
  if (c.config_path.empty()) return config::parse_config_text("{}", config::process_env());
  return config::parse_config(c.config_path);
}

std::string frame_name(const std::string& prefix, std::uint64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05llu.ppm", prefix.c_str(), static_cast<unsigned long long>(index));
  return buf;
}

std::string tile_prefix(int row, int col) { return "tile_" + std::to_string(row) + "_" + std::to_string(col); }

/// Frames a script produces: one initial frame plus one per redraw event.
std::uint64_t expected_frames(const std::vector<interact::EventMsg>& events, const cluster::JobConfig& cfg) {
  interact::InteractionSession s({}, cfg.mode, cfg.caching);
  std::uint64_t frames = 1;
  std::uint32_t seq = 0;
  for (interact::EventMsg e : events) {
    e.seq = ++seq;
    const auto r = s.apply(e);
    if (r.quit) break;
    if (r.redraw()) ++frames;
  }
  return frames;
}

std::vector<interact::EventMsg> script_events(const std::string& path, std::uint32_t frames) {
  if (!path.empty()) return interact::load_event_script(path);
  return interact::rotate_script(frames, 0.02f);
}

/// Replays bytes already read from a connection before reading on.
class PrefixedSource : public wire::ByteSource {
 public:
  PrefixedSource(Bytes prefix, std::unique_ptr<wire::TcpStream> inner)
      : prefix_(std::move(prefix)), inner_(std::move(inner)) {}
  std::size_t receive(std::span<std::uint8_t> into) override {
    if (offset_ < prefix_.size()) {
      const std::size_t n = std::min(into.size(), prefix_.size() - offset_);
      std::copy_n(prefix_.begin() + static_cast<std::ptrdiff_t>(offset_), n, into.begin());
      offset_ += n;
      return n;
    }
    return inner_->receive(into);
  }
  void close() override { inner_->shutdown(); }

 private:
  Bytes prefix_;
  std::size_t offset_ = 0;
  std::unique_ptr<wire::TcpStream> inner_;
};

/// Reads up to the first complete command, which must be BEGIN_FRAME, and
/// returns the sender rank it names with the bytes read so far.
std::pair<std::uint32_t, Bytes> identify_sender(wire::TcpStream& s) {
  Bytes buf;
  std::uint8_t chunk[4096];
  for (;;) {
    const wire::DecodeResult r = wire::decode(buf);
    if (r.status == wire::DecodeStatus::malformed) throw wire::ProtocolError("first command malformed: " + r.error);
    if (r.status == wire::DecodeStatus::ok) {
      const auto* begin = std::get_if<wire::BeginFrame>(&r.command);
      if (begin == nullptr) throw wire::ProtocolError("connection did not start with BEGIN_FRAME");
      return {begin->sender_rank, std::move(buf)};
    }
    const std::size_t n = s.receive(chunk);
    if (n == 0) throw wire::ChannelClosed("connection closed before BEGIN_FRAME");
    buf.insert(buf.end(), chunk, chunk + n);
  }
}

/// Turns an interrupt into a call of `stop` from a watcher thread.
class InterruptWatcher {
 public:
  explicit InterruptWatcher(std::function<void()> stop)
      : thread_([this, stop = std::move(stop)] {
          while (!done_) {
            if (g_interrupted.exchange(false)) {
              spdlog::warn("interrupt: broadcasting QUIT");
              stop();
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
          }
        }) {}
  ~InterruptWatcher() {
    done_ = true;
    thread_.join();
  }

 private:
  std::atomic<bool> done_{false};
  std::thread thread_;
};

// ---------------------------------------------------------------- local

struct LocalOptions {
  std::string script;
  std::uint32_t frames = 10;
  std::string ppm_dir;
  std::string tiles_dir;
  bool ui = false;
  double timeout_sec = 120.0;
};

/// One viewer connection: hello on connect, then frames and stats; events
/// received from it go to `post`.
class UiServer {
 public:
  UiServer(const std::string& addr, interact::UiHello hello, std::function<void(const interact::EventMsg&)> post)
      : listener_(addr), hello_(hello), post_(std::move(post)) {
    spdlog::info("viewer channel on port {}", listener_.port());
    thread_ = std::thread([this] { serve(); });
  }
  ~UiServer() {
    stopping_ = true;
    listener_.close();
    {
      std::lock_guard lock(mu_);
      if (client_) client_->shutdown();
    }
    thread_.join();
  }

  void push(const interact::UiMessage& msg) {
    const Bytes bytes = interact::encode_ui(msg);
    std::lock_guard lock(mu_);
    if (!client_) return;
    try {
      client_->send(bytes);
    } catch (const std::exception& e) {
      spdlog::warn("viewer send failed: {}", e.what());
    }
  }

 private:
  void serve() {
    while (!stopping_) {
      std::unique_ptr<wire::TcpStream> conn;
      try {
        conn = listener_.accept();
      } catch (const std::exception&) {
        return;
      }
      if (!conn) return;
      {
        std::lock_guard lock(mu_);
        client_ = std::move(conn);
        client_->send(interact::encode_ui(hello_));
      }
      spdlog::info("viewer connected");
      interact::EventStreamDecoder dec;
      std::uint8_t chunk[4096];
      try {
        for (;;) {
          const std::size_t n = client_->receive(chunk);
          if (n == 0) break;
          dec.feed(ByteView(chunk, n));
          while (auto e = dec.next()) post_(*e);
        }
      } catch (const std::exception& e) {
        spdlog::warn("viewer channel: {}", e.what());
      }
      spdlog::info("viewer disconnected");
      std::lock_guard lock(mu_);
      client_.reset();
    }
  }

  wire::TcpListener listener_;
  interact::UiHello hello_;
  std::function<void(const interact::EventMsg&)> post_;
  std::mutex mu_;
  std::unique_ptr<wire::TcpStream> client_;
  std::atomic<bool> stopping_{false};
  std::thread thread_;
};

int run_local(const Common& common, const LocalOptions& opt) {
  const cluster::JobConfig cfg = load_config(common);
  const std::vector<interact::EventMsg> events =
      opt.ui ? std::vector<interact::EventMsg>{} : script_events(opt.script, opt.frames);
  const std::uint64_t want = opt.ui ? 0 : expected_frames(events, cfg);
  if (!opt.ppm_dir.empty()) fs::create_directories(opt.ppm_dir);
  if (!opt.tiles_dir.empty()) fs::create_directories(opt.tiles_dir);

  std::mutex mu;
  std::condition_variable cv;
  std::uint64_t frames = 0;
  bool quit_seen = false;
  std::optional<wire::Clock::time_point> last_frame;
  double fps = 0.0;
  UiServer* ui = nullptr;

  cluster::LocalJobOptions lo;
  lo.both_modes = true;
  lo.on_diagnostic = [](const std::string& m) { spdlog::warn("{}", m); };
  lo.on_frame = [&](const cluster::JobFrame& f) {
    if (!opt.ppm_dir.empty()) write_ppm(f.image, fs::path(opt.ppm_dir) / frame_name("frame", f.index));
    if (!opt.tiles_dir.empty() && f.mode == cluster::DisplayMode::tiled) {
      for (const TileRect& t : cfg.grid().tiles()) {
        Framebuffer tile(t.rect);
        for (int y = t.rect.y; y < t.rect.y + t.rect.h; ++y) {
          for (int x = t.rect.x; x < t.rect.x + t.rect.w; ++x) tile.set(x, y, f.image.color_at(x, y), f.image.depth_at(x, y));
        }
        write_ppm(tile, fs::path(opt.tiles_dir) / frame_name(tile_prefix(t.id.row, t.id.col), f.index));
      }
    }
    std::lock_guard lock(mu);
    if (last_frame) {
      const double dt = std::chrono::duration<double>(f.completed - *last_frame).count();
      if (dt > 0.0) fps = fps == 0.0 ? 1.0 / dt : 0.8 * fps + 0.2 / dt;
    }
    last_frame = f.completed;
    ++frames;
    spdlog::debug("frame {} ({} bytes)", f.index, f.traffic.total());
    if (ui != nullptr) {
      ui->push(interact::make_ui_frame(static_cast<std::uint32_t>(f.index), f.image));
      ui->push(interact::UiStats{static_cast<float>(fps), f.traffic.bytes});
    }
    cv.notify_all();
  };

  std::unique_ptr<cluster::LocalJob> job;
  if (cfg.scene.is_volume()) {
    job = std::make_unique<cluster::LocalJob>(cfg, cluster::build_volume(cfg.scene), lo);
  } else {
    job = std::make_unique<cluster::LocalJob>(cfg, cluster::build_partitions(cfg.scene, cfg.app_nodes), lo);
  }
  spdlog::info("local job: {} app nodes, {}x{} tiles of {}x{}, mode {}", cfg.app_nodes, cfg.tile_rows, cfg.tile_cols,
               cfg.tile_width, cfg.tile_height, cluster::to_string(cfg.mode));

  std::mutex post_mu;
  auto post = [&](const interact::EventMsg& e) {
    std::lock_guard lock(post_mu);
    if (quit_seen) return;
    if (e.kind == interact::EventKind::quit) {
      {
        std::lock_guard l(mu);
        quit_seen = true;
      }
      cv.notify_all();
      return;
    }
    job->post(e);
  };

  std::unique_ptr<UiServer> ui_server;
  if (opt.ui) {
    if (cfg.ui_addr.empty()) throw std::invalid_argument("--ui needs ui_addr in the config");
    interact::UiHello hello{static_cast<std::uint32_t>(std::random_device{}()),
                            static_cast<std::uint16_t>(cfg.grid().mural_w()),
                            static_cast<std::uint16_t>(cfg.grid().mural_h()), static_cast<std::uint8_t>(cfg.mode),
                            cfg.caching};
    ui_server = std::make_unique<UiServer>(cfg.ui_addr, hello, post);
    std::lock_guard lock(mu);
    ui = ui_server.get();
  }

  InterruptWatcher watcher([&] { post(interact::quit()); });
  for (const auto& e : events) post(e);

  const auto deadline = wire::Clock::now() + std::chrono::duration_cast<wire::Clock::duration>(
                                                 std::chrono::duration<double>(opt.timeout_sec));
  bool timed_out = false;
  {
    std::unique_lock lock(mu);
    if (opt.ui) {
      cv.wait(lock, [&] { return quit_seen; });
    } else {
      timed_out = !cv.wait_until(lock, deadline, [&] { return quit_seen || frames >= want; });
    }
    ui = nullptr;
  }
  ui_server.reset();
  job->quit();
  const auto diags = job->diagnostics();
  spdlog::info("{} frames presented", frames);
  if (timed_out) {
    spdlog::error("timed out with {} of {} frames", frames, want);
    return 1;
  }
  return diags.empty() ? 0 : 1;
}

// ---------------------------------------------------------------- master

struct MasterCliOptions {
  std::string script;
  double interval_ms = 0.0;
};

int run_master(const Common& common, const MasterCliOptions& opt) {
  const cluster::JobConfig cfg = load_config(common);
  wire::TcpListener listener(cfg.master_addr);
  spdlog::info("master on {} waiting for {} app nodes", cfg.master_addr, cfg.app_nodes);
  std::vector<std::unique_ptr<wire::ByteSink>> slaves;
  while (slaves.size() < cfg.app_nodes) {
    auto conn = listener.accept();
    if (!conn) throw std::runtime_error("listener closed");
    slaves.push_back(std::move(conn));
    spdlog::info("app node connected ({}/{})", slaves.size(), cfg.app_nodes);
  }
  listener.close();
  interact::Master master(std::move(slaves), interact::InteractionSession({}, cfg.mode, cfg.caching));
  std::mutex mu;
  bool done = false;
  auto post = [&](const interact::EventMsg& e) {
    std::lock_guard lock(mu);
    if (done) return;
    master.post(e);
    if (e.kind == interact::EventKind::quit) done = true;
  };
  InterruptWatcher watcher([&] { post(interact::quit()); });

  std::unique_ptr<wire::TcpListener> ui_listener;
  if (!cfg.ui_addr.empty() && opt.script.empty()) {
    ui_listener = std::make_unique<wire::TcpListener>(cfg.ui_addr);
    spdlog::info("waiting for a viewer on {}", cfg.ui_addr);
    auto ui = ui_listener->accept();
    if (ui) {
      ui->send(interact::encode_ui(interact::UiHello{1, static_cast<std::uint16_t>(cfg.grid().mural_w()),
                                                     static_cast<std::uint16_t>(cfg.grid().mural_h()),
                                                     static_cast<std::uint8_t>(cfg.mode), cfg.caching}));
      interact::EventStreamDecoder dec;
      std::uint8_t chunk[4096];
      try {
        for (std::size_t n; (n = ui->receive(chunk)) > 0;) {
          dec.feed(ByteView(chunk, n));
          while (auto e = dec.next()) post(*e);
        }
      } catch (const std::exception& e) {
        spdlog::warn("viewer channel: {}", e.what());
      }
    }
  } else {
    const auto events = script_events(opt.script, 10);
    for (const auto& e : events) {
      post(e);
      if (opt.interval_ms > 0.0) std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(opt.interval_ms));
    }
  }
  post(interact::quit());
  master.close();
  int rc = 0;
  for (const auto& st : master.status()) {
    if (st.failed) {
      spdlog::error("slave link failed: {}", st.error);
      rc = 1;
    }
  }
  spdlog::info("master done after {} events", master.last_seq());
  return rc;
}

// ---------------------------------------------------------------- appnode

int run_appnode(const Common& common, std::uint32_t rank) {
  const cluster::JobConfig cfg = load_config(common);
  if (rank >= cfg.app_nodes) {
    throw std::invalid_argument("rank " + std::to_string(rank) + " out of range: the job has " +
                                std::to_string(cfg.app_nodes) + " app nodes");
  }
  if (cfg.throttle) spdlog::warn("throttle settings apply to in-process jobs only; TCP links run unthrottled");
  std::vector<std::unique_ptr<wire::TcpStream>> servers;
  std::vector<std::string> addrs = cfg.resolved_server_addrs();
  if (cfg.mode == cluster::DisplayMode::composited) addrs.resize(cfg.servers());
  for (const auto& a : addrs) servers.push_back(wire::TcpStream::connect(a, std::chrono::seconds(30)));
  std::vector<wire::ByteSink*> sinks;
  for (auto& s : servers) sinks.push_back(s.get());

  cluster::AppNodeConfig nc{rank, cfg.app_nodes, cfg.mode, cfg.grid(), cfg.bucket_batch, 4096, cfg.render_cost_sec};
  std::unique_ptr<cluster::AppNode> node;
  if (cfg.scene.is_volume()) {
    node = std::make_unique<cluster::AppNode>(nc, cluster::build_volume(cfg.scene), sinks);
  } else {
    auto parts = cluster::build_partitions(cfg.scene, cfg.app_nodes);
    node = std::make_unique<cluster::AppNode>(
        nc, std::make_shared<const ScenePartition>(std::move(parts[rank])), sinks);
  }
  auto events = wire::TcpStream::connect(cfg.master_addr, std::chrono::seconds(30));
  spdlog::info("app node {} connected to master and {} servers", rank, servers.size());

  interact::InteractionSession session({}, cfg.mode, cfg.caching);
  session.set_logging(false);
  auto render = [&](const interact::InteractionSession& s) {
    if (s.mode() != cfg.mode) {
      if (rank == 0) spdlog::warn("SET_MODE to {} ignored: multi-process jobs keep the configured mode", cluster::to_string(s.mode()));
      return;
    }
    node->render_frame(s.camera(), s.caching());
  };
  render(session);
  const interact::SlaveReport report = interact::slave_loop(session, *events, render);
  for (auto& s : servers) s->close();
  spdlog::info("app node {}: {} events, {} frames", rank, report.events, report.frames + 1);
  if (!report.quit) {
    spdlog::error("app node {}: {}", rank, report.diagnostic);
    return 1;
  }
  return 0;
}

// ---------------------------------------------------------------- tileserver

int run_tileserver(const Common& common, int row, int col, const std::string& out_dir) {
  const cluster::JobConfig cfg = load_config(common);
  const TileGrid grid = cfg.grid();
  if (row < 0 || row >= grid.rows || col < 0 || col >= grid.cols) {
    throw std::invalid_argument("tile (" + std::to_string(row) + ", " + std::to_string(col) + ") is outside the " +
                                std::to_string(grid.rows) + "x" + std::to_string(grid.cols) + " grid");
  }
  const int index = grid.index({row, col});
  const std::string addr = cfg.resolved_server_addrs().at(static_cast<std::size_t>(index));
  wire::TcpListener listener(addr);
  spdlog::info("tile server ({}, {}) on {} waiting for {} app nodes", row, col, addr, cfg.app_nodes);

  std::vector<std::unique_ptr<wire::ByteSource>> sources(cfg.app_nodes);
  for (std::uint32_t k = 0; k < cfg.app_nodes; ++k) {
    auto conn = listener.accept();
    if (!conn) throw std::runtime_error("listener closed");
    auto [rank, prefix] = identify_sender(*conn);
    if (rank >= cfg.app_nodes || sources[rank]) {
      throw wire::ProtocolError("unexpected or duplicate sender rank " + std::to_string(rank));
    }
    sources[rank] = std::make_unique<PrefixedSource>(std::move(prefix), std::move(conn));
  }
  listener.close();
  if (!out_dir.empty()) fs::create_directories(out_dir);

  cluster::TileServerConfig sc;
  sc.viewport = cluster::server_viewports(cfg.mode, grid).at(static_cast<std::size_t>(index));
  sc.mural_w = grid.mural_w();
  sc.mural_h = grid.mural_h();
  sc.n_senders = cfg.app_nodes;
  sc.watchdog = std::chrono::milliseconds(static_cast<long long>(cfg.watchdog_sec * 1000.0));
  std::atomic<std::uint64_t> presented{0};
  auto server = std::make_unique<cluster::TileServer>(sc, [&](const cluster::PresentedFrame& f) {
    ++presented;
    spdlog::debug("presented frame {}", f.frame_no);
    if (!out_dir.empty()) write_ppm(f.image, fs::path(out_dir) / frame_name(tile_prefix(row, col), f.present_no - 1));
  });
  std::atomic<int> problems{0};
  cluster::TileServerHost host(std::move(server), std::move(sources), [&](const std::string& m) {
    ++problems;
    spdlog::warn("{}", m);
  });
  host.join();
  spdlog::info("tile server ({}, {}): {} frames presented", row, col, presented.load());
  return problems == 0 ? 0 : 1;
}

// ---------------------------------------------------------------- bench

int run_bench(const std::string& scenario_path, const std::string& out_path) {
  const bench::ScenarioFile file = bench::load_scenarios(scenario_path);
  std::vector<bench::Measurement> results;
  int failures = 0;
  for (const auto& s : file.scenarios) {
    spdlog::info("scenario {} ...", s.name);
    bench::Measurement m = bench::run_scenario(s);
    spdlog::info("  {:.3f} fps, {:.0f} bytes/frame", m.fps(), m.median_bytes());
    for (const auto& f : bench::check(s, m)) {
      if (s.acceptance) {
        spdlog::error("  FAIL {}", f);
        ++failures;
      } else {
        spdlog::warn("  {}", f);
      }
    }
    results.push_back(std::move(m));
  }
  bench::emit_results(results, out_path);
  const auto cells = bench::summarize(results);
  std::cout << bench::summary_table(cells);
  spdlog::info("results written to {}", out_path);
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sort-first tiled display renderer"};
  app.require_subcommand(1);
  Common common;
  app.add_option("-c,--config", common.config_path, "JobConfig JSON file (TW_* variables override keys)");
  app.add_flag("-v,--verbose", common.verbose, "Debug logging");

  LocalOptions local;
  auto* local_cmd = app.add_subcommand("local", "Run master, app nodes and tile servers in one process");
  local_cmd->add_option("--script", local.script, "JSON event script");
  local_cmd->add_option("--frames", local.frames, "Frames of the default rotate drag when no script is given");
  local_cmd->add_option("--ppm", local.ppm_dir, "Write every mural frame as PPM into this directory");
  local_cmd->add_option("--tiles", local.tiles_dir, "Write every tile of tiled frames as PPM into this directory");
  local_cmd->add_flag("--ui", local.ui, "Serve a viewer on ui_addr and run until QUIT");
  local_cmd->add_option("--timeout", local.timeout_sec, "Seconds to wait for scripted frames");

  MasterCliOptions master;
  auto* master_cmd = app.add_subcommand("master", "Broadcast input events to the app nodes");
  master_cmd->add_option("--script", master.script, "JSON event script (default: a 10-step rotate drag)");
  master_cmd->add_option("--interval-ms", master.interval_ms, "Pause between scripted events");

  std::uint32_t rank = 0;
  auto* app_cmd = app.add_subcommand("appnode", "Run one app node");
  app_cmd->add_option("--rank", rank, "Rank of this app node")->required();

  int row = 0;
  int col = 0;
  std::string tile_out;
  auto* tile_cmd = app.add_subcommand("tileserver", "Run one tile server");
  tile_cmd->add_option("--row", row)->required();
  tile_cmd->add_option("--col", col)->required();
  tile_cmd->add_option("--out", tile_out, "Write presented frames as PPM into this directory");

  std::string scenario;
  std::string bench_out = "bench.csv";
  auto* bench_cmd = app.add_subcommand("bench", "Run benchmark scenarios");
  bench_cmd->add_option("--scenario", scenario, "Scenario JSON file")->required();
  bench_cmd->add_option("--out", bench_out, "Results CSV (summary goes next to it)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(common.verbose ? spdlog::level::debug : spdlog::level::info);
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    if (*local_cmd) return run_local(common, local);
    if (*master_cmd) return run_master(common, master);
    if (*app_cmd) return run_appnode(common, rank);
    if (*tile_cmd) return run_tileserver(common, row, col, tile_out);
    if (*bench_cmd) return run_bench(scenario, bench_out);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 2;
  }
  return 0;
}
