#include "tilewall/cluster/job.hpp"

#include "tilewall/cluster/composite.hpp"

namespace tw::cluster {

const char* to_string(SceneSpec::Kind kind) {
  switch (kind) {
    case SceneSpec::Kind::sphere: return "sphere";
    case SceneSpec::Kind::synthetic: return "synthetic";
    case SceneSpec::Kind::stl: return "stl";
    case SceneSpec::Kind::volume: return "volume";
  }
  return "?";
}

SceneSpec::Kind parse_scene_kind(const std::string& name) {
  if (name == "sphere") return SceneSpec::Kind::sphere;
  if (name == "synthetic") return SceneSpec::Kind::synthetic;
  if (name == "stl") return SceneSpec::Kind::stl;
  if (name == "volume") return SceneSpec::Kind::volume;
  throw std::invalid_argument("unknown scene kind '" + name + "'");
}

Mesh build_mesh(const SceneSpec& spec) {
  switch (spec.kind) {
    case SceneSpec::Kind::sphere: return gen_reference_sphere();
    case SceneSpec::Kind::synthetic: return gen_synthetic_scene(spec.bytes, spec.seed);
    case SceneSpec::Kind::stl: return load_stl(spec.path);
    case SceneSpec::Kind::volume: break;
  }
  throw std::invalid_argument("scene kind 'volume' has no mesh");
}

std::vector<ScenePartition> build_partitions(const SceneSpec& spec, std::size_t n) {
  return partition_scene(build_mesh(spec), n, spec.partition, spec.cacheable);
}

std::shared_ptr<const VolumeGrid> build_volume(const SceneSpec& spec) {
  if (spec.kind != SceneSpec::Kind::volume) throw std::invalid_argument("scene is not a volume");
  if (!spec.path.empty()) return std::make_shared<const VolumeGrid>(load_volume(spec.path));
  return std::make_shared<const VolumeGrid>(gen_random_volume(spec.dims, spec.seed));
}

std::vector<std::string> JobConfig::resolved_server_addrs() const {
  if (!server_addrs.empty()) return server_addrs;
  const wire::HostPort master = wire::parse_host_port(master_addr);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < servers(); ++i) {
    out.push_back(master.host + ":" + std::to_string(master.port + 10 + i));
  }
  return out;
}

LocalJob::LocalJob(JobConfig config, std::vector<ScenePartition> partitions, LocalJobOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  if (partitions.size() != config_.app_nodes) {
    throw std::invalid_argument("expected " + std::to_string(config_.app_nodes) + " partitions, got " +
                                std::to_string(partitions.size()));
  }
  std::vector<std::shared_ptr<const ScenePartition>> shared;
  for (auto& p : partitions) shared.push_back(std::make_shared<const ScenePartition>(std::move(p)));
  start([&](DisplayMode mode, std::uint32_t rank, std::vector<wire::ByteSink*> sinks) {
    AppNodeConfig c{rank, config_.app_nodes, mode, config_.grid(), config_.bucket_batch, 4096, config_.render_cost_sec};
    return std::make_unique<AppNode>(c, shared[rank], std::move(sinks));
  });
}

LocalJob::LocalJob(JobConfig config, std::shared_ptr<const VolumeGrid> volume, LocalJobOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  start([&](DisplayMode mode, std::uint32_t rank, std::vector<wire::ByteSink*> sinks) {
    AppNodeConfig c{rank, config_.app_nodes, mode, config_.grid(), config_.bucket_batch, 4096, config_.render_cost_sec};
    return std::make_unique<AppNode>(c, volume, std::move(sinks));
  });
}

void LocalJob::start(
    const std::function<std::unique_ptr<AppNode>(DisplayMode, std::uint32_t, std::vector<wire::ByteSink*>)>&
        make_node) {
  if (config_.app_nodes == 0) throw std::invalid_argument("a job needs at least one app node");
  if (config_.throttle) link_ = std::make_shared<wire::ThrottledLink>(*config_.throttle);

  const TileGrid grid = config_.grid();
  std::vector<DisplayMode> modes{config_.mode};
  if (options_.both_modes) {
    modes.push_back(config_.mode == DisplayMode::tiled ? DisplayMode::composited : DisplayMode::tiled);
  }
  for (DisplayMode mode : modes) {
    ServerSet& set = sets_[mode];
    const std::vector<PixelRect> viewports = server_viewports(mode, grid);
    set.sinks.resize(config_.app_nodes);
    std::vector<std::vector<std::unique_ptr<wire::ByteSource>>> sources(viewports.size());
    for (std::uint32_t r = 0; r < config_.app_nodes; ++r) {
      for (std::size_t s = 0; s < viewports.size(); ++s) {
        auto [sink, source] = wire::make_pipe(link_);
        set.sinks[r].push_back(std::move(sink));
        sources[s].push_back(std::move(source));
      }
    }
    for (std::size_t s = 0; s < viewports.size(); ++s) {
      TileServerConfig sc;
      sc.viewport = viewports[s];
      sc.mural_w = grid.mural_w();
      sc.mural_h = grid.mural_h();
      sc.n_senders = config_.app_nodes;
      sc.watchdog = std::chrono::milliseconds(static_cast<long long>(config_.watchdog_sec * 1000.0));
      sc.record_log = options_.record_server_logs;
      auto server = std::make_unique<TileServer>(
          sc, [this, mode, s](const PresentedFrame& f) { on_present(mode, s, f); });
      set.hosts.push_back(std::make_unique<TileServerHost>(std::move(server), std::move(sources[s]),
                                                           [this](const std::string& m) { diagnose(m); }));
    }
    for (std::uint32_t r = 0; r < config_.app_nodes; ++r) {
      std::vector<wire::ByteSink*> raw;
      for (auto& sink : set.sinks[r]) raw.push_back(sink.get());
      set.nodes.push_back(make_node(mode, r, std::move(raw)));
    }
  }

  std::vector<std::unique_ptr<wire::ByteSink>> event_sinks;
  std::vector<std::unique_ptr<wire::ByteSource>> event_sources;
  for (std::uint32_t r = 0; r < config_.app_nodes; ++r) {
    auto [sink, source] = wire::make_pipe();
    event_sinks.push_back(std::move(sink));
    event_sources.push_back(std::move(source));
  }
  interact::MasterOptions mo;
  mo.coalesce_moves = options_.coalesce_moves;
  master_ = std::make_unique<interact::Master>(
      std::move(event_sinks), interact::InteractionSession(options_.initial_camera, config_.mode, config_.caching), mo);

  reports_.resize(config_.app_nodes);
  slave_cameras_.resize(config_.app_nodes);
  for (std::uint32_t r = 0; r < config_.app_nodes; ++r) {
    app_threads_.emplace_back([this, r, src = std::move(event_sources[r])]() mutable { app_main(r, std::move(src)); });
  }
}

LocalJob::~LocalJob() {
  try {
    quit();
  } catch (const std::exception&) {
  }
}

void LocalJob::app_main(std::uint32_t rank, std::unique_ptr<wire::ByteSource> events) {
  interact::InteractionSession session(options_.initial_camera, config_.mode, config_.caching);
  session.set_logging(false);
  const auto render = [&](const interact::InteractionSession& s) {
    auto it = sets_.find(s.mode());
    if (it == sets_.end()) {
      if (rank == 0) diagnose(std::string("no server set for mode ") + to_string(s.mode()) + "; frame skipped");
      return;
    }
    AppNode& node = *it->second.nodes[rank];
    const FrameTraffic traffic = node.render_frame(s.camera(), s.caching());
    on_traffic(s.mode(), node.frames() - 1, traffic);
  };
  interact::SlaveReport report;
  try {
    if (options_.render_initial_frame) {
      render(session);
      ++report.frames;
    }
    const interact::SlaveReport loop = interact::slave_loop(session, *events, render);
    report.events = loop.events;
    report.frames += loop.frames;
    report.quit = loop.quit;
    report.diagnostic = loop.diagnostic;
  } catch (const std::exception& e) {
    report.diagnostic = e.what();
  }
  if (!report.diagnostic.empty()) diagnose("app node " + std::to_string(rank) + ": " + report.diagnostic);
  for (auto& [mode, set] : sets_) {
    for (auto& sink : set.sinks[rank]) sink->close();
  }
  events->close();
  reports_[rank] = report;
  slave_cameras_[rank] = session.camera();
}

interact::ApplyResult LocalJob::post(const interact::EventMsg& e) { return master_->post(e); }

interact::ApplyResult LocalJob::post_burst(std::span<const interact::EventMsg> burst) {
  return master_->post_burst(burst);
}

void LocalJob::on_present(DisplayMode mode, std::size_t server, const PresentedFrame& frame) {
  const std::uint64_t index = frame.present_no - 1;
  {
    std::lock_guard lock(mu_);
    Pending& p = pending_[{mode, index}];
    if (p.images.empty()) p.images.resize(sets_.at(mode).hosts.size());
    p.images[server] = frame.image;
  }
  try_complete(mode, index);
}

void LocalJob::on_traffic(DisplayMode mode, std::uint64_t index, const FrameTraffic& traffic) {
  {
    std::lock_guard lock(mu_);
    Pending& p = pending_[{mode, index}];
    if (p.traffic.bytes.empty()) {
      p.traffic.bytes.assign(traffic.bytes.size(), 0);
      p.traffic.geometry_bytes.assign(traffic.bytes.size(), 0);
    }
    for (std::size_t s = 0; s < traffic.bytes.size(); ++s) {
      p.traffic.bytes[s] += traffic.bytes[s];
      p.traffic.geometry_bytes[s] += traffic.geometry_bytes[s];
    }
    ++p.traffic_reports;
  }
  try_complete(mode, index);
}

void LocalJob::try_complete(DisplayMode mode, std::uint64_t index) {
  JobFrame frame;
  {
    std::lock_guard lock(mu_);
    auto it = pending_.find({mode, index});
    if (it == pending_.end()) return;
    Pending& p = it->second;
    if (p.traffic_reports < config_.app_nodes || p.images.empty()) return;
    for (const auto& img : p.images) {
      if (!img) return;
    }
    frame.index = index;
    frame.mode = mode;
    frame.traffic = std::move(p.traffic);
    if (mode == DisplayMode::tiled) {
      std::vector<Framebuffer> tiles;
      for (auto& img : p.images) tiles.push_back(std::move(*img));
      frame.image = assemble_tiles(config_.grid(), tiles);
    } else {
      frame.image = std::move(*p.images[0]);
    }
    frame.completed = wire::Clock::now();
    pending_.erase(it);
    if (!options_.on_frame) completed_.push_back(frame);
  }
  if (options_.on_frame) {
    options_.on_frame(frame);
  } else {
    frame_cv_.notify_all();
  }
}

std::optional<JobFrame> LocalJob::next_frame(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mu_);
  if (!frame_cv_.wait_for(lock, timeout, [&] { return !completed_.empty(); })) return std::nullopt;
  JobFrame f = std::move(completed_.front());
  completed_.pop_front();
  return f;
}

void LocalJob::quit() {
  {
    std::lock_guard lock(mu_);
    if (quit_done_) return;
    quit_done_ = true;
  }
  try {
    master_->post(interact::quit());
  } catch (const std::exception& e) {
    diagnose(std::string("QUIT broadcast failed: ") + e.what());
  }
  master_->close();
  for (auto& t : app_threads_) {
    if (t.joinable()) t.join();
  }
  for (auto& [mode, set] : sets_) {
    for (auto& host : set.hosts) host->join();
  }
}

void LocalJob::diagnose(const std::string& msg) {
  {
    std::lock_guard lock(mu_);
    diagnostics_.push_back(msg);
  }
  if (options_.on_diagnostic) options_.on_diagnostic(msg);
}

std::vector<std::string> LocalJob::diagnostics() const {
  std::lock_guard lock(mu_);
  return diagnostics_;
}

TileServer& LocalJob::server(DisplayMode mode, std::size_t index) { return sets_.at(mode).hosts.at(index)->server(); }

std::uint64_t LocalJob::aborted_frames() const {
  std::uint64_t n = 0;
  for (const auto& [mode, set] : sets_) {
    for (const auto& host : set.hosts) n += host->server().aborted_frames();
  }
  return n;
}

}  // namespace tw::cluster
