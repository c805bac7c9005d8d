#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "perseus/frontier.hpp"
#include "perseus/serde.hpp"

namespace perseus {

struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& message) : std::runtime_error(message), status(s) {}
};

// Register jobs, characterize their frontiers on background workers, answer
// schedule lookups, and react to straggler notifications. State lives in flat
// files under the working directory (one JSON record per job, frontier
// artifacts in a sibling directory) and survives restarts.
class JobManager {
 public:
  struct Options {
    std::filesystem::path workdir = "perseus-work";
    int workers = 2;  // 0 runs nothing in the background; drive run_pending_once() manually
    std::int64_t quantum_us = kDefaultQuantumUs;
    double p_blocking_watts = kDefaultBlockingWatts;  // default when profiles omit it
  };

  explicit JobManager(Options opt) : opt_(std::move(opt)) {
    std::filesystem::create_directories(opt_.workdir / "jobs");
    reload();
    for (int i = 0; i < opt_.workers; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ~JobManager() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    timer_cv_.notify_all();
    for (auto& t : workers_) t.join();
    for (auto& t : timers_) t.join();
  }

  JobManager(const JobManager&) = delete;
  JobManager& operator=(const JobManager&) = delete;

  // POST /jobs body: {"dag": "1f1b:4x8" | {custom dag}, "profiles": {...},
  // "tau_us": optional}. Validates everything up front; returns the job id.
  std::string submit(const nlohmann::json& body) {
    if (!body.is_object()) throw HttpError(422, "body must be a JSON object");
    if (!body.contains("dag") || !body.contains("profiles"))
      throw HttpError(422, "body needs dag and profiles");
    auto job = std::make_shared<Job>();
    job->dag_json = body.at("dag");
    job->profiles_json = body.at("profiles");
    job->tau_us = body.value("tau_us", kDefaultTauUs);
    try {
      build_runtime(*job);
    } catch (const std::exception& e) {
      throw HttpError(422, e.what());
    }
    {
      std::lock_guard lk(mu_);
      char buf[32];
      std::snprintf(buf, sizeof buf, "job-%06d", next_id_++);
      job->id = buf;
      jobs_[job->id] = job;
      queue_.push_back(job->id);
    }
    {
      std::lock_guard jlk(job->mu);
      persist_locked(*job);
    }
    cv_.notify_one();
    return job->id;
  }

  // GET /jobs/{id}/schedule[?straggler_time_us=T']. Before the frontier is
  // ready this serves the all-max schedule annotated with the current state.
  nlohmann::ordered_json schedule_response(const std::string& id,
                                           std::optional<std::int64_t> straggler_time_us) {
    auto job = find(id);
    std::lock_guard lk(job->mu);
    nlohmann::ordered_json out;
    out["job_id"] = job->id;
    out["state"] = job->state;
    if (job->state != "ready") {
      if (job->state == "failed") out["error"] = job->error;
      out["schedule"] = schedule_json(all_max_schedule(job->dag, job->model), opt_.quantum_us);
      return out;
    }
    const EnergySchedule* sched;
    if (straggler_time_us) {
      if (*straggler_time_us < 0) throw HttpError(422, "straggler_time_us must be non-negative");
      sched = &lookup(job->frontier, *straggler_time_us / opt_.quantum_us);
    } else {
      sched = &job->frontier.schedules.at(job->deployed_schedule_id);
    }
    out["deployed_schedule_id"] = job->deployed_schedule_id;
    out["schedule"] = schedule_json(*sched, opt_.quantum_us);
    return out;
  }

  // POST /jobs/{id}/straggler {"delay_s": D, "degree": g}: after D seconds the
  // deployed schedule becomes lookup(g * T_min). Later notifications win over
  // earlier pending ones. Degree 1 restores the T_min schedule.
  nlohmann::ordered_json straggler(const std::string& id, const nlohmann::json& body) {
    auto job = find(id);
    if (!body.is_object() || !body.contains("delay_s") || !body.contains("degree") ||
        !body.at("delay_s").is_number() || !body.at("degree").is_number())
      throw HttpError(422, "body needs numeric delay_s and degree");
    const double delay_s = body.at("delay_s").get<double>();
    const double degree = body.at("degree").get<double>();
    if (delay_s < 0) throw HttpError(422, "delay_s must be non-negative");
    if (degree < 1.0) throw HttpError(422, "degree must be at least 1");

    std::int64_t seq;
    Quanta target;
    {
      std::lock_guard lk(job->mu);
      seq = ++job->straggler_seq;
      target = std::llround(degree * static_cast<double>(job->t_min));
    }
    if (delay_s == 0) {
      apply_straggler(job, seq, target);
    } else {
      std::lock_guard lk(mu_);
      timers_.emplace_back([this, job, seq, target, delay_s] {
        std::unique_lock tlk(timer_mu_);
        timer_cv_.wait_for(tlk, std::chrono::duration<double>(delay_s), [this] { return stop_.load(); });
        if (stop_) return;
        tlk.unlock();
        apply_straggler(job, seq, target);
      });
    }
    nlohmann::ordered_json out;
    out["job_id"] = job->id;
    out["status"] = "scheduled";
    out["delay_s"] = delay_s;
    out["degree"] = degree;
    out["target_time_us"] = target * opt_.quantum_us;
    return out;
  }

  std::string state_of(const std::string& id) {
    auto job = find(id);
    std::lock_guard lk(job->mu);
    return job->state;
  }

  // Synchronously characterize one queued job; test hook for workers == 0.
  bool run_pending_once() {
    std::string id;
    {
      std::lock_guard lk(mu_);
      if (queue_.empty()) return false;
      id = queue_.front();
      queue_.pop_front();
    }
    characterize(jobs_.at(id));
    return true;
  }

  std::vector<std::string> job_ids() {
    std::lock_guard lk(mu_);
    std::vector<std::string> ids;
    for (const auto& [id, job] : jobs_) ids.push_back(id);
    return ids;
  }

 private:
  struct Job {
    std::string id;
    std::string state = "pending";  // pending | characterizing | ready | failed
    std::string error;
    nlohmann::json dag_json;  // spec string or custom-dag object, as submitted
    nlohmann::json profiles_json;
    std::int64_t tau_us = kDefaultTauUs;

    NodeDag dag;
    CostModel model;
    Quanta t_min = 0;
    Frontier frontier;  // immutable once state == ready
    int deployed_schedule_id = -1;
    std::optional<Quanta> desired_time;  // straggler target awaiting readiness
    std::int64_t straggler_seq = 0;
    std::mutex mu;
  };

  void build_runtime(Job& job) const {
    if (job.tau_us <= 0 || job.tau_us % opt_.quantum_us != 0)
      throw std::invalid_argument("tau_us must be a positive multiple of the quantum");
    if (job.dag_json.is_string())
      job.dag = parse_dag_spec(job.dag_json.get<std::string>(), opt_.workdir);
    else
      job.dag = custom_dag_from_json(job.dag_json);
    const ProfileSet set =
        profile_set_from_json(job.profiles_json, opt_.quantum_us, opt_.p_blocking_watts);
    job.model = CostModel::build(set, opt_.quantum_us);
    const AllMaxAssignment am = all_max_assignment(job.dag, job.model);  // validates coverage
    job.t_min = simulate(job.dag, am.durations).iteration_time;
  }

  std::shared_ptr<Job> find(const std::string& id) {
    std::lock_guard lk(mu_);
    auto it = jobs_.find(id);
    if (it == jobs_.end()) throw HttpError(404, "unknown job: " + id);
    return it->second;
  }

  void apply_straggler(const std::shared_ptr<Job>& job, std::int64_t seq, Quanta target) {
    std::lock_guard lk(job->mu);
    if (seq != job->straggler_seq) return;  // a newer notification superseded this one
    job->desired_time = target;
    if (job->state == "ready")
      job->deployed_schedule_id = lookup(job->frontier, target).schedule_id;
    persist_locked(*job);
  }

  void worker_loop() {
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lk(mu_);
        cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
        if (stop_) return;
        job = jobs_.at(queue_.front());
        queue_.pop_front();
      }
      characterize(job);
    }
  }

  void characterize(const std::shared_ptr<Job>& job) {
    {
      std::lock_guard lk(job->mu);
      job->state = "characterizing";
      persist_locked(*job);
    }
    try {
      Frontier frontier =
          discover_frontier(job->dag, job->model, job->tau_us / opt_.quantum_us);
      OptimizeManifest manifest;
      manifest.dag_spec = job->dag_json.is_string() ? job->dag_json.get<std::string>() : "custom";
      manifest.tau_us = job->tau_us;
      manifest.quantum_us = opt_.quantum_us;
      manifest.p_blocking_watts = job->model.blocking.watts;
      write_frontier_artifacts(opt_.workdir / "jobs" / job->id, frontier, manifest);
      std::lock_guard lk(job->mu);
      job->frontier = std::move(frontier);
      job->state = "ready";
      job->deployed_schedule_id =
          lookup(job->frontier, job->desired_time.value_or(job->t_min)).schedule_id;
      persist_locked(*job);
    } catch (const std::exception& e) {
      std::lock_guard lk(job->mu);
      job->state = "failed";
      job->error = e.what();
      persist_locked(*job);
    }
  }

  void persist_locked(const Job& job) const {
    nlohmann::ordered_json j;
    j["id"] = job.id;
    j["state"] = job.state;
    if (!job.error.empty()) j["error"] = job.error;
    j["dag"] = job.dag_json;
    j["tau_us"] = job.tau_us;
    j["quantum_us"] = opt_.quantum_us;
    j["p_blocking_watts"] = job.model.blocking.watts;
    j["t_min_us"] = job.t_min * opt_.quantum_us;
    j["deployed_schedule_id"] = job.deployed_schedule_id;
    if (job.desired_time) j["desired_time_us"] = *job.desired_time * opt_.quantum_us;
    j["profiles"] = job.profiles_json;
    detail::write_text(opt_.workdir / "jobs" / (job.id + ".json"), j.dump(2) + "\n");
  }

  void reload() {
    std::vector<std::filesystem::path> records;
    const auto dir = opt_.workdir / "jobs";
    for (const auto& entry : std::filesystem::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().extension() == ".json")
        records.push_back(entry.path());
    std::sort(records.begin(), records.end());
    for (const auto& file : records) {
      nlohmann::json j;
      try {
        j = detail::parse_json(detail::read_text(file), file.string());
      } catch (const std::exception&) {
        continue;
      }
      auto job = std::make_shared<Job>();
      job->id = j.value("id", file.stem().string());
      job->state = j.value("state", "pending");
      job->error = j.value("error", "");
      job->dag_json = j.value("dag", nlohmann::json{});
      job->profiles_json = j.value("profiles", nlohmann::json{});
      job->tau_us = j.value("tau_us", kDefaultTauUs);
      job->deployed_schedule_id = j.value("deployed_schedule_id", -1);
      if (j.contains("desired_time_us"))
        job->desired_time = j.at("desired_time_us").get<Quanta>() / opt_.quantum_us;
      if (job->state != "failed") {
        try {
          build_runtime(*job);
          if (job->state == "ready") {
            const auto art_dir = opt_.workdir / "jobs" / job->id;
            job->frontier = load_frontier_artifacts(art_dir, load_manifest(art_dir));
          }
        } catch (const std::exception& e) {
          job->state = "failed";
          job->error = e.what();
        }
      }
      if (job->state == "pending" || job->state == "characterizing") {
        job->state = "pending";
        queue_.push_back(job->id);
      }
      if (job->id.size() > 4 && job->id.substr(0, 4) == "job-")
        next_id_ = std::max(next_id_, std::atoi(job->id.c_str() + 4) + 1);
      jobs_[job->id] = std::move(job);
    }
  }

  Options opt_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> queue_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::vector<std::thread> workers_;
  std::vector<std::thread> timers_;
  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::atomic<bool> stop_{false};
  int next_id_ = 1;
};

}  // namespace perseus
