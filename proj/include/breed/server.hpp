#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "breed/channel.hpp"
#include "breed/checkpoint.hpp"
#include "breed/deviation_ledger.hpp"
#include "breed/heatpde.hpp"
#include "breed/job_table.hpp"
#include "breed/messages.hpp"
#include "breed/mlp.hpp"
#include "breed/reservoir.hpp"
#include "breed/rng.hpp"
#include "breed/run_artifacts.hpp"
#include "breed/run_config.hpp"
#include "breed/sampler.hpp"
#include "breed/socket_transport.hpp"
#include "breed/validation.hpp"

namespace breed {

// The seeded uniform draw that fills the job table before any steering.
inline std::vector<SimParams> initial_uniform_draw(std::uint64_t seed, const Bounds& bounds,
                                                   std::uint32_t budget) {
    std::mt19937_64 rng = seeded_engine(seed, Stream::initial_draw);
    std::vector<SimParams> out;
    out.reserve(budget);
    for (std::uint32_t i = 0; i < budget; ++i) out.push_back(uniform_params(bounds, rng));
    return out;
}

// Consumes decoded client messages: HELLO/SAMPLE/DONE. A SAMPLE the
// reservoir rejects is parked and retried, never dropped; while it is
// parked no later message is consumed, which preserves per-client order.
class IngestProcessor {
public:
    IngestProcessor(JobTable& table, Reservoir& reservoir)
        : table_(table), reservoir_(reservoir) {}

    // Returns the sim id when the message was a DONE (a launcher slot was
    // freed), nullopt otherwise. Must not be called while a put is pending.
    std::optional<std::uint32_t> process(const Message& msg) {
        if (pending_) throw std::logic_error("ingest: process() while a put is pending");
        switch (msg.tag()) {
            case MsgTag::hello:
                table_.mark_running(msg.sim_id);
                return std::nullopt;
            case MsgTag::sample: {
                const auto& body = std::get<SampleBody>(msg.body);
                ReservoirEntry entry;
                entry.key = {msg.sim_id, body.t};
                entry.params = table_.params(msg.sim_id);  // throws UnknownSim
                entry.target = body.field;
                if (reservoir_.put(std::move(entry))) {
                    ++ingested_;
                } else {
                    ++rejected_;
                    pending_ = std::move(entry);
                }
                return std::nullopt;
            }
            case MsgTag::done:
                table_.mark_done(msg.sim_id);
                return msg.sim_id;
            default:
                throw MalformedMessage("server ingest: unexpected tag " +
                                       std::to_string(static_cast<int>(msg.tag())));
        }
    }

    bool has_pending() const { return pending_.has_value(); }

    bool retry_pending() {
        if (!pending_) return false;
        if (reservoir_.put(std::move(*pending_))) {
            pending_.reset();
            ++ingested_;
            return true;
        }
        ++rejected_;
        return false;
    }

    std::uint64_t ingested() const { return ingested_; }
    std::uint64_t rejected() const { return rejected_; }

private:
    JobTable& table_;
    Reservoir& reservoir_;
    std::optional<ReservoirEntry> pending_;
    std::uint64_t ingested_ = 0;
    std::uint64_t rejected_ = 0;
};

// The training activity: owns the network and the ledger, steps batches,
// fires the steering trigger every `period` iterations, and evaluates on
// the fixed validation set.
class Trainer {
public:
    Trainer(const RunConfig& cfg, JobTable& table, Reservoir& reservoir,
            std::vector<Mlp<float>::Sample> validation, MetricsWriter& metrics,
            SampleLogWriter& sample_log)
        : cfg_(cfg),
          table_(table),
          reservoir_(reservoir),
          net_(cfg.mlp),
          ledger_(cfg.breed.budget, static_cast<std::uint32_t>(cfg.solver.t_steps) + 1),
          validation_(std::move(validation)),
          metrics_(metrics),
          sample_log_(sample_log),
          breed_rng_(cfg.breed.seed) {}

    bool finished() const { return iteration_ >= cfg_.iteration_cap && table_.all_done(); }
    bool can_step() const { return !finished() && reservoir_.is_ready(); }

    void step() {
        const std::vector<ReservoirEntry> entries =
            reservoir_.draw_batch(cfg_.reservoir.batch_size);
        batch_.clear();
        batch_.reserve(entries.size());
        for (const ReservoirEntry& e : entries) {
            Mlp<float>::Sample s;
            s.key = e.key;
            const std::array<double, 6> in =
                normalize(e.params, e.key.t, cfg_.breed.bounds, cfg_.solver.t_steps);
            for (int d = 0; d < 6; ++d) s.input[d] = static_cast<float>(in[d]);
            s.target = normalize_target(e.target, cfg_.breed.bounds);
            batch_.push_back(std::move(s));
        }

        const TrainRecord rec = net_.train_step(batch_, iteration_ + 1);
        ++iteration_;
        ledger_.record_batch(rec);
        if (iteration_ % cfg_.sample_log_period == 0) sample_log_.write(iteration_, rec);

        if (cfg_.mode == RunMode::breed && iteration_ % cfg_.breed.period == 0)
            steering_trigger();

        std::optional<double> val;
        if (iteration_ % cfg_.eval_period == 0) {
            val = net_.evaluate(validation_);
            last_val_loss_ = *val;
        }
        last_train_loss_ = rec.mu;
        metrics_.write({iteration_, rec.mu, val, rec.mu, rec.sigma, resamplings_,
                        r_value(resamplings_, cfg_.breed), reservoir_.size()});
    }

    // Overwrites the parameters of every steerable simulation with a fresh
    // resample. A no-op (s unchanged) while nothing is scored or steerable.
    void steering_trigger() {
        if (ledger_.completed_count() == 0) return;
        const std::vector<SimParams> params = table_.params_snapshot();
        const std::uint32_t applied = table_.steer(
            [&](std::uint32_t k) {
                return breed_resample(ledger_, params, k, resamplings_, cfg_.breed, breed_rng_)
                    .draws;
            },
            static_cast<int>(resamplings_) + 1);
        if (applied > 0) ++resamplings_;
    }

    double evaluate_validation() const { return net_.evaluate(validation_); }

    std::uint64_t iteration() const { return iteration_; }
    std::uint64_t resamplings() const { return resamplings_; }
    double last_train_loss() const { return last_train_loss_; }
    const DeviationLedger& ledger() const { return ledger_; }
    Mlp<float>& net() { return net_; }

private:
    const RunConfig& cfg_;
    JobTable& table_;
    Reservoir& reservoir_;
    Mlp<float> net_;
    DeviationLedger ledger_;
    std::vector<Mlp<float>::Sample> validation_;
    MetricsWriter& metrics_;
    SampleLogWriter& sample_log_;
    std::mt19937_64 breed_rng_;
    std::vector<Mlp<float>::Sample> batch_;  // scratch
    std::uint64_t iteration_ = 0;
    std::uint64_t resamplings_ = 0;
    double last_train_loss_ = 0.0;
    double last_val_loss_ = 0.0;
};

namespace engine {

// One client as an incremental message producer, for the deterministic
// scheduler: HELLO, SAMPLE t = 0..T in order, DONE. Each SAMPLE step
// advances the solver by one timestep.
class SimClient {
public:
    SimClient(std::uint32_t sim_id, const SimParams& params, const SolverConfig& solver)
        : sim_id_(sim_id), params_(params), solver_(solver), field_(init_field(params, solver)) {}

    bool finished() const { return phase_ == Phase::finished; }

    Message next_message() {
        switch (phase_) {
            case Phase::hello:
                phase_ = Phase::streaming;
                return {sim_id_, HelloBody{}};
            case Phase::streaming: {
                Message msg{sim_id_, SampleBody{next_t_, to_float_field(field_)}};
                if (next_t_ == static_cast<std::uint32_t>(solver_.t_steps)) {
                    phase_ = Phase::done;
                } else {
                    field_ = step(field_, params_, solver_);
                    ++next_t_;
                }
                return msg;
            }
            case Phase::done:
                phase_ = Phase::finished;
                return {sim_id_, DoneBody{}};
            default:
                throw std::logic_error("SimClient stepped past DONE");
        }
    }

private:
    enum class Phase { hello, streaming, done, finished };
    std::uint32_t sim_id_;
    SimParams params_;
    const SolverConfig& solver_;
    Field field_;
    std::uint32_t next_t_ = 0;
    Phase phase_ = Phase::hello;
};

inline constexpr std::size_t kSimQueueCapacity = 64;

// Deterministic cooperative engine: every activity (each client, the ingest
// loop, the trainer) advances one step at a time in a seeded random
// interleaving. Same config and seed, same run, byte for byte; varying the
// scheduler seed is how the protocol races get stress-tested.
inline void run_deterministic(const RunConfig& cfg, JobTable& table, IngestProcessor& ingest,
                              Trainer& trainer, std::uint64_t scheduler_seed) {
    std::mt19937_64 sched_rng(scheduler_seed);
    std::deque<Message> queue;
    std::vector<std::unique_ptr<SimClient>> clients;

    auto spawn = [&](const std::vector<JobTable::Submission>& subs) {
        for (const auto& sub : subs)
            clients.push_back(std::make_unique<SimClient>(sub.sim_id, sub.params, cfg.solver));
    };
    spawn(table.launcher_tick());

    enum class Activity { client, ingest, trainer };
    std::vector<std::pair<Activity, std::size_t>> runnable;

    while (!(table.all_done() && trainer.iteration() >= cfg.iteration_cap)) {
        runnable.clear();
        if (queue.size() < kSimQueueCapacity)
            for (std::size_t i = 0; i < clients.size(); ++i)
                runnable.emplace_back(Activity::client, i);
        if (!queue.empty() || ingest.has_pending())
            runnable.emplace_back(Activity::ingest, 0);
        if (trainer.can_step()) runnable.emplace_back(Activity::trainer, 0);
        if (runnable.empty())
            throw std::logic_error("scheduler stalled: no runnable activity");

        std::uniform_int_distribution<std::size_t> pick(0, runnable.size() - 1);
        const auto [activity, index] = runnable[pick(sched_rng)];
        switch (activity) {
            case Activity::client: {
                SimClient& c = *clients[index];
                queue.push_back(c.next_message());
                if (c.finished()) clients.erase(clients.begin() + static_cast<std::ptrdiff_t>(index));
                break;
            }
            case Activity::ingest: {
                if (ingest.has_pending()) {
                    ingest.retry_pending();  // one poll of the paused client
                    break;
                }
                const Message msg = std::move(queue.front());
                queue.pop_front();
                if (ingest.process(msg)) spawn(table.launcher_tick());
                break;
            }
            case Activity::trainer:
                trainer.step();
                break;
        }
    }
}

// Preemptive engine: real client threads stream through a bounded channel
// (optionally over loopback TCP), one ingest thread, the trainer on the
// calling thread. Not byte-reproducible; used for deployment-shaped runs.
inline void run_threaded(const RunConfig& cfg, JobTable& table, IngestProcessor& ingest,
                         Trainer& trainer) {
    const bool over_socket = cfg.execution == Execution::socket;
    Channel<Message> channel(kSimQueueCapacity);
    const auto backoff = std::chrono::duration<double, std::milli>(cfg.ingest_backoff_ms);

    std::mutex threads_mu;
    std::vector<std::thread> client_threads;
    std::vector<std::thread> reader_threads;
    std::mutex error_mu;
    std::exception_ptr first_error;
    auto record_error = [&] {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
    };

    std::unique_ptr<TcpListener> listener;
    std::atomic<bool> accepting{false};
    std::thread acceptor;
    if (over_socket) {
        listener = std::make_unique<TcpListener>();
        accepting.store(true);
        acceptor = std::thread([&] {
            while (accepting.load()) {
                const int fd = listener->accept_with_timeout(20);
                if (fd < 0) continue;
                std::lock_guard lock(threads_mu);
                reader_threads.emplace_back([fd, &channel, &record_error] {
                    try {
                        while (auto msg = read_frame(fd)) channel.push(std::move(*msg));
                    } catch (...) {
                        record_error();
                        channel.close();
                    }
                    ::close(fd);
                });
            }
        });
    }

    auto client_main = [&cfg, &channel, &record_error, over_socket,
                        port = over_socket ? listener->port() : std::uint16_t(0)](
                           JobTable::Submission sub) {
        try {
            if (over_socket) {
                const int fd = tcp_connect(port);
                send_frame(fd, {sub.sim_id, HelloBody{}});
                run_trajectory(sub.sim_id, sub.params, cfg.solver, [&](FieldSample fs) {
                    send_frame(fd, {fs.sim_id, SampleBody{fs.t, std::move(fs.field)}});
                });
                send_frame(fd, {sub.sim_id, DoneBody{}});
                ::close(fd);
            } else {
                channel.push({sub.sim_id, HelloBody{}});
                run_trajectory(sub.sim_id, sub.params, cfg.solver, [&](FieldSample fs) {
                    channel.push({fs.sim_id, SampleBody{fs.t, std::move(fs.field)}});
                });
                channel.push({sub.sim_id, DoneBody{}});
            }
        } catch (...) {
            record_error();
            channel.close();
        }
    };

    auto spawn = [&](const std::vector<JobTable::Submission>& subs) {
        std::lock_guard lock(threads_mu);
        for (const auto& sub : subs) client_threads.emplace_back(client_main, sub);
    };
    spawn(table.launcher_tick());

    std::thread ingest_thread([&] {
        try {
            while (!table.all_done()) {
                auto msg = channel.pop_wait();
                if (!msg) break;  // closed: shutdown or error elsewhere
                if (ingest.process(*msg)) spawn(table.launcher_tick());
                while (ingest.has_pending() && !ingest.retry_pending())
                    std::this_thread::sleep_for(backoff);  // paused client
            }
        } catch (...) {
            record_error();
            channel.close();
        }
    });

    try {
        while (!trainer.finished()) {
            {
                std::lock_guard lock(error_mu);
                if (first_error) break;
            }
            if (!trainer.can_step()) {
                std::this_thread::sleep_for(std::chrono::milliseconds(1));
                continue;
            }
            trainer.step();
        }
    } catch (...) {
        record_error();
    }
    channel.close();  // no-op on clean shutdown paths that already closed

    ingest_thread.join();
    accepting.store(false);
    if (acceptor.joinable()) acceptor.join();
    for (auto threads : {&client_threads, &reader_threads})
        for (std::thread& t : *threads)
            if (t.joinable()) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace engine

// Loads the validation set, generating and persisting it first if absent,
// and checks that it matches the solver discretization.
inline ValidationSet ensure_validation(const RunConfig& cfg) {
    if (std::filesystem::exists(cfg.validation_path)) {
        ValidationSet set = load_validation(cfg.validation_path);
        if (set.grid_size != static_cast<std::uint32_t>(cfg.solver.grid_size) ||
            set.t_steps != static_cast<std::uint32_t>(cfg.solver.t_steps))
            throw std::runtime_error("validation set at " + cfg.validation_path +
                                     " does not match the configured discretization");
        return set;
    }
    ValidationSet set = gen_validation(cfg.validation_size, cfg.breed.bounds, cfg.solver);
    std::filesystem::create_directories(
        std::filesystem::path(cfg.validation_path).parent_path());
    save_validation(set, cfg.validation_path);
    return set;
}

inline std::vector<Mlp<float>::Sample> validation_samples(const ValidationSet& set,
                                                          const Bounds& bounds) {
    std::vector<Mlp<float>::Sample> out;
    out.reserve(static_cast<std::size_t>(set.n) * (set.t_steps + 1));
    const std::size_t field = set.field_size();
    for (std::uint32_t i = 0; i < set.n; ++i) {
        for (std::uint32_t t = 0; t <= set.t_steps; ++t) {
            Mlp<float>::Sample s;
            s.key = {i, t};
            const std::array<double, 6> in =
                normalize(set.params[i], t, bounds, static_cast<int>(set.t_steps));
            for (int d = 0; d < 6; ++d) s.input[d] = static_cast<float>(in[d]);
            s.target = normalize_target(
                std::span<const float>(set.trajectories[i].data() + t * field, field), bounds);
            out.push_back(std::move(s));
        }
    }
    return out;
}

// Drives one full run: streams the budget of trajectories through the
// reservoir into training, steering pending inputs when in breed mode, and
// leaves metrics.csv, samples.csv, simulations.csv and run_summary.csv in
// the output directory.
inline RunResult run(const RunConfig& cfg) {
    cfg.validate();
    std::filesystem::create_directories(cfg.output_dir);
    cfg.write_file(cfg.output_dir + "/config.used");

    const ValidationSet val_set = ensure_validation(cfg);
    std::vector<Mlp<float>::Sample> val = validation_samples(val_set, cfg.breed.bounds);

    JobTable table(initial_uniform_draw(cfg.seed, cfg.breed.bounds, cfg.breed.budget),
                   cfg.max_in_flight);
    Reservoir reservoir(cfg.reservoir);
    IngestProcessor ingest(table, reservoir);
    MetricsWriter metrics(cfg.output_dir + "/metrics.csv");
    SampleLogWriter sample_log(cfg.output_dir + "/samples.csv");
    Trainer trainer(cfg, table, reservoir, std::move(val), metrics, sample_log);

    if (cfg.execution == Execution::sim) {
        engine::run_deterministic(cfg, table, ingest, trainer,
                                  derive_seed(cfg.seed, Stream::scheduler));
    } else {
        engine::run_threaded(cfg, table, ingest, trainer);
    }

    RunResult result;
    result.iterations = trainer.iteration();
    result.resamplings = trainer.resamplings();
    result.sims_done = table.done_count();
    result.samples_ingested = ingest.ingested();
    result.rejected_puts = ingest.rejected();
    result.final_train_loss = trainer.last_train_loss();
    result.final_val_loss = trainer.evaluate_validation();
    result.train_val_gap = std::abs(result.final_train_loss - result.final_val_loss);

    const std::vector<SimRow> rows = table.snapshot();
    std::vector<SimulationRow> audit;
    audit.reserve(rows.size());
    for (std::uint32_t id = 0; id < rows.size(); ++id) {
        audit.push_back({id, rows[id].params, rows[id].provenance, rows[id].generation,
                         trainer.ledger().q(id), trainer.ledger().q_update_iteration(id)});
    }
    write_simulations_csv(cfg.output_dir + "/simulations.csv", audit);
    write_run_summary(cfg.output_dir + "/run_summary.csv", result);
    save_checkpoint(trainer.net(), cfg.output_dir + "/network.bin");
    metrics.flush();
    return result;
}

}  // namespace breed
