// Copyright (c) 2026 The hiertune Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "hiertune/measure.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "hiertune/error.hpp"

namespace hiertune {

void SimHwParams::validate() const {
  if (cores < 1) throw ValidationError("sim field 'cores' must be >= 1");
  if (!(cap_l1 > 0 && cap_l2 > 0)) throw ValidationError("sim cache capacities must be > 0");
  if (!(miss_l1 > 0 && miss_l2 > 0)) throw ValidationError("sim miss penalties must be > 0");
  if (!(peak_flops > 0)) throw ValidationError("sim field 'peak_flops' must be > 0");
  if (parallel_overhead < 0) throw ValidationError("sim field 'parallel_overhead' must be >= 0");
  if (noise_sigma < 0) throw ValidationError("sim field 'noise_sigma' must be >= 0");
  if (cache_write_overhead < 0 || rfactor_overhead < 0) {
    throw ValidationError("sim structure overheads must be >= 0");
  }
  for (const auto& [depth, m] : unroll_multiplier) {
    if (!(m > 0)) throw ValidationError(fmt::format("sim unroll multiplier for {} must be > 0", depth));
  }
}

void SimHwParams::apply(const nlohmann::ordered_json& overrides) {
  if (overrides.is_null()) return;
  if (!overrides.is_object()) throw ValidationError("sim overrides must be an object");
  for (const auto& [key, value] : overrides.items()) {
    if (key == "unroll_multiplier") {
      unroll_multiplier.clear();
      for (const auto& [depth, m] : value.items()) unroll_multiplier[std::stoi(depth)] = m.get<double>();
    } else {
      apply(key, value.dump());
    }
  }
  validate();
}

void SimHwParams::apply(std::string_view key, std::string_view value) {
  double v = 0.0;
  try {
    v = std::stod(std::string(value));
  } catch (const std::exception&) {
    throw ValidationError(fmt::format("sim override '{}' needs a number, got '{}'", key, value));
  }
  if (key == "cores") cores = static_cast<int>(v);
  else if (key == "cap_l1") cap_l1 = v;
  else if (key == "cap_l2") cap_l2 = v;
  else if (key == "miss_l1") miss_l1 = v;
  else if (key == "miss_l2") miss_l2 = v;
  else if (key == "parallel_overhead") parallel_overhead = v;
  else if (key == "peak_flops") peak_flops = v;
  else if (key == "noise_sigma") noise_sigma = v;
  else if (key == "noise_seed") noise_seed = static_cast<std::uint64_t>(v);
  else if (key == "cache_write_overhead") cache_write_overhead = v;
  else if (key == "rfactor_overhead") rfactor_overhead = v;
  else if (key.substr(0, 7) == "unroll_") unroll_multiplier[std::stoi(std::string(key.substr(7)))] = v;
  else throw ValidationError(fmt::format("unknown sim parameter '{}'", key));
  validate();
}

nlohmann::ordered_json SimHwParams::to_json() const {
  nlohmann::ordered_json j;
  j["cores"] = cores;
  j["cap_l1"] = cap_l1;
  j["cap_l2"] = cap_l2;
  j["miss_l1"] = miss_l1;
  j["miss_l2"] = miss_l2;
  j["parallel_overhead"] = parallel_overhead;
  j["peak_flops"] = peak_flops;
  j["noise_sigma"] = noise_sigma;
  j["noise_seed"] = noise_seed;
  j["cache_write_overhead"] = cache_write_overhead;
  j["rfactor_overhead"] = rfactor_overhead;
  nlohmann::ordered_json table = nlohmann::ordered_json::object();
  for (const auto& [depth, m] : unroll_multiplier) table[std::to_string(depth)] = m;
  j["unroll_multiplier"] = table;
  return j;
}

double simulate_time(const ScheduleState& s, const SketchContext& ctx, const SimHwParams& p) {
  const auto& space = ctx.sketch->space;
  const int depth = space.unroll_depths[s.unroll_index];
  const auto it = p.unroll_multiplier.find(depth);
  const double unroll = it == p.unroll_multiplier.end() ? 1.0 : it->second;
  const double cores = static_cast<double>(p.cores);
  double total = 0.0;
  for (const auto& stage : ctx.stages) {
    const auto fp = stage_footprint(s, *ctx.sketch, *ctx.sg, stage);
    const double miss = (1.0 + p.miss_l1 * std::max(0.0, fp.l1 / p.cap_l1 - 1.0)) *
                        (1.0 + p.miss_l2 * std::max(0.0, fp.l2 / p.cap_l2 - 1.0));
    const int fused = std::min(s.parallel_fuse_count, static_cast<int>(stage.parallel_loops.size()));
    double parallel = 1.0;
    if (fused > 0) {
      const double e = parallel_extent(s, stage, *ctx.sg, fused);
      parallel = std::min(e, cores) * (e / (std::ceil(e / cores) * cores)) *
                 std::max(1e-3, 1.0 - p.parallel_overhead * (fused - 1));
    }
    double structure = 1.0;
    if (stage.structure == NodeStructure::CacheWriteThenTiled) structure += p.cache_write_overhead;
    if (stage.structure == NodeStructure::RFactorThenTiled) structure += p.rfactor_overhead;
    total += stage.flops / p.peak_flops * miss * unroll * structure / parallel;
  }
  return total;
}

SimulatedBackend::SimulatedBackend(SimHwParams params)
    : params_(std::move(params)), noise_rng_(params_.noise_seed) {
  params_.validate();
}

std::vector<MeasureResult> SimulatedBackend::measure_batch(std::span<const MeasureRequest> requests) {
  std::vector<MeasureResult> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    MeasureResult r;
    r.time_seconds = simulate_time(req.state, *req.ctx, params_);
    if (params_.noise_sigma > 0) {
      std::normal_distribution<double> normal(0.0, params_.noise_sigma);
      r.time_seconds *= std::exp(normal(noise_rng_));
    }
    r.throughput = req.ctx->sg->flops / r.time_seconds;
    r.valid = std::isfinite(r.time_seconds) && r.time_seconds > 0;
    r.repeats = 1;
    if (!r.valid) r.error = "simulated time is not positive";
    out.push_back(std::move(r));
  }
  return out;
}

std::string SimulatedBackend::save_state() const {
  std::ostringstream os;
  os << noise_rng_;
  return os.str();
}

void SimulatedBackend::load_state(std::string_view state) {
  if (state.empty()) return;
  std::istringstream is{std::string(state)};
  is >> noise_rng_;
  if (!is) throw CheckpointError("corrupt simulator noise state");
}

// ---------------------------------------------------------------------------
// External command backend

namespace {

using Clock = std::chrono::steady_clock;

class ChildProcess {
 public:
  explicit ChildProcess(const std::string& command) {
    int in_pipe[2];
    int out_pipe[2];
    int err_pipe[2];
    if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0 || pipe(err_pipe) != 0) {
      throw Error("pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw Error("fork() failed");
    if (pid_ == 0) {
      dup2(in_pipe[0], STDIN_FILENO);
      dup2(out_pipe[1], STDOUT_FILENO);
      dup2(err_pipe[1], STDERR_FILENO);
      for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) {
        close(fd);
      }
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);
    close(err_pipe[1]);
    in_ = in_pipe[1];
    out_ = out_pipe[0];
    err_ = err_pipe[0];
    fcntl(out_, F_SETFL, O_NONBLOCK);
    fcntl(err_, F_SETFL, O_NONBLOCK);
  }

  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;

  ~ChildProcess() {
    close_stdin();
    if (out_ >= 0) close(out_);
    if (err_ >= 0) close(err_);
    if (pid_ > 0 && !reaped_) {
      kill(pid_, SIGKILL);
      waitpid(pid_, nullptr, 0);
    }
  }

  bool write_line(const std::string& line) {
    if (in_ < 0) return false;
    std::string data = line + "\n";
    const char* p = data.data();
    std::size_t left = data.size();
    struct sigaction ignore{};
    ignore.sa_handler = SIG_IGN;
    struct sigaction old{};
    sigaction(SIGPIPE, &ignore, &old);
    bool ok = true;
    while (left > 0) {
      const auto n = write(in_, p, left);
      if (n <= 0) {
        ok = false;
        break;
      }
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    sigaction(SIGPIPE, &old, nullptr);
    return ok;
  }

  void close_stdin() {
    if (in_ >= 0) {
      close(in_);
      in_ = -1;
    }
  }

  /// Next stdout line, or nullopt on EOF / deadline.
  std::optional<std::string> read_line(Clock::time_point deadline, bool* timed_out) {
    *timed_out = false;
    while (true) {
      const auto nl = out_buf_.find('\n');
      if (nl != std::string::npos) {
        auto line = out_buf_.substr(0, nl);
        out_buf_.erase(0, nl + 1);
        return line;
      }
      if (out_eof_) return std::nullopt;
      if (!pump(deadline)) {
        *timed_out = true;
        return std::nullopt;
      }
    }
  }

  /// Waits for exit; returns the exit status or nullopt on timeout.
  std::optional<int> wait_exit(Clock::time_point deadline) {
    close_stdin();
    while (!out_eof_ || !err_eof_) {
      if (!pump(deadline)) return std::nullopt;
    }
    while (true) {
      int status = 0;
      const auto r = waitpid(pid_, &status, WNOHANG);
      if (r == pid_) {
        reaped_ = true;
        if (WIFEXITED(status)) return WEXITSTATUS(status);
        return 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
      }
      if (Clock::now() >= deadline) return std::nullopt;
      usleep(1000);
    }
  }

  const std::string& stderr_text() const { return err_buf_; }

 private:
  // Reads whatever is available on stdout/stderr; false when the deadline passed.
  bool pump(Clock::time_point deadline) {
    pollfd fds[2];
    int n = 0;
    if (!out_eof_) fds[n++] = {out_, POLLIN, 0};
    if (!err_eof_) fds[n++] = {err_, POLLIN, 0};
    if (n == 0) return true;
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
    if (left.count() <= 0) return false;
    const int r = poll(fds, n, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (r <= 0) return Clock::now() < deadline;
    for (int i = 0; i < n; ++i) {
      if (!(fds[i].revents & (POLLIN | POLLHUP | POLLERR))) continue;
      const bool is_out = fds[i].fd == out_;
      char buf[4096];
      const auto got = read(fds[i].fd, buf, sizeof buf);
      if (got > 0) {
        (is_out ? out_buf_ : err_buf_).append(buf, static_cast<std::size_t>(got));
      } else if (got == 0 || (errno != EAGAIN && errno != EINTR)) {
        (is_out ? out_eof_ : err_eof_) = true;
      }
    }
    return true;
  }

  pid_t pid_ = -1;
  int in_ = -1;
  int out_ = -1;
  int err_ = -1;
  bool out_eof_ = false;
  bool err_eof_ = false;
  bool reaped_ = false;
  std::string out_buf_;
  std::string err_buf_;
};

}  // namespace

std::string external_request_line(const MeasureRequest& request) {
  nlohmann::ordered_json j;
  j["workload"] = request.workload_id;
  j["subgraph"] = request.ctx->sg->id;
  j["sketch"] = request.ctx->sketch->describe();
  j["schedule"] = request.state.canonical();
  return j.dump();
}

ExternalCommandBackend::ExternalCommandBackend(Options options) : options_(std::move(options)) {
  if (options_.command.empty()) throw ValidationError("external backend needs a command");
  if (!(options_.min_repeat_seconds >= 0)) throw ValidationError("r_min must be >= 0");
}

MeasureResult ExternalCommandBackend::measure_one(const MeasureRequest& request) const {
  MeasureResult result;
  const auto deadline =
      Clock::now() + std::chrono::milliseconds(static_cast<long long>(options_.timeout_seconds * 1000));
  ChildProcess child(options_.command);
  const auto line = external_request_line(request);
  double total = 0.0;
  auto fail = [&](std::string why) {
    result.valid = false;
    result.error = std::move(why);
    return result;
  };
  while (true) {
    if (!child.write_line(line)) break;
    bool timed_out = false;
    auto reply = child.read_line(deadline, &timed_out);
    if (timed_out) return fail(fmt::format("timeout after {} s", options_.timeout_seconds));
    if (!reply) break;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(*reply);
    } catch (const nlohmann::json::exception&) {
      return fail(fmt::format("malformed response line '{}'", *reply));
    }
    if (j.contains("error")) return fail(j["error"].dump());
    if (!j.contains("time_seconds") || !j["time_seconds"].is_number()) {
      return fail(fmt::format("response lacks time_seconds: '{}'", *reply));
    }
    const double t = j["time_seconds"].get<double>();
    if (!(t > 0) || !std::isfinite(t)) return fail(fmt::format("non-positive time {}", t));
    total += t;
    ++result.repeats;
    if (total >= options_.min_repeat_seconds || result.repeats >= options_.max_repeats) break;
  }
  const auto status = child.wait_exit(deadline);
  if (!status) return fail(fmt::format("timeout after {} s", options_.timeout_seconds));
  if (*status != 0) {
    return fail(fmt::format("command exited with status {}: {}", *status, child.stderr_text()));
  }
  if (result.repeats == 0) return fail("command produced no measurement");
  result.valid = true;
  result.time_seconds = total / result.repeats;
  result.throughput = request.ctx->sg->flops / result.time_seconds;
  return result;
}

std::vector<MeasureResult> ExternalCommandBackend::measure_batch(
    std::span<const MeasureRequest> requests) {
  std::vector<MeasureResult> out;
  out.reserve(requests.size());
  for (const auto& req : requests) {
    try {
      out.push_back(measure_one(req));
    } catch (const Error& e) {
      MeasureResult r;
      r.error = e.what();
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

BruteForceResult brute_force_best(const SketchContext& ctx, const SimHwParams& p, const BigInt& cap) {
  const auto size = space_size(*ctx.sketch);
  if (size > cap) {
    throw ValidationError(fmt::format("space of sketch {} has {} states, above the cap of {}",
                                      ctx.sketch->id, size.str(), cap.str()));
  }
  BruteForceResult r;
  std::string best_key;
  std::string worst_key;
  enumerate_space(*ctx.sketch, [&](const ScheduleState& s) {
    const double t = simulate_time(s, ctx, p);
    ++r.states;
    if (r.states == 1) {
      r.best = r.worst = s;
      r.best_time = r.worst_time = t;
      best_key = worst_key = s.canonical();
      return;
    }
    if (t <= r.best_time) {
      auto key = s.canonical();
      if (t < r.best_time || key < best_key) {
        r.best = s;
        r.best_time = t;
        best_key = std::move(key);
      }
    }
    if (t > r.worst_time) {
      r.worst = s;
      r.worst_time = t;
      worst_key = s.canonical();
    }
  });
  return r;
}

}  // namespace hiertune
