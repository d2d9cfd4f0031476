// ntpp command-line tool: corpus generation, training, sampling, streaming
// conversation, analysis and benchmarking.
//
// Every option can also come from a JSON config (--config run.json) whose
// keys are the option names with '_' for '-'. Flags override the file; the
// merged settings are written to <out>/config.json.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ntpp/analyzer.hpp"
#include "ntpp/evaluation.hpp"
#include "ntpp/mask.hpp"
#include "ntpp/model.hpp"
#include "ntpp/streaming.hpp"
#include "ntpp/synthetic.hpp"
#include "ntpp/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ntpp;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Options of one subcommand, mirrored into a JSON object.
class Settings {
public:
    explicit Settings(CLI::App* app) : app_(app) {
        app_->add_option("--config", config_path_, "JSON file with option values");
    }

    template <class T>
    CLI::Option* add(const std::string& key, T& var, const std::string& help) {
        auto* opt = app_->add_option("--" + flag_name(key), var, help);
        if constexpr (!std::is_same_v<T, std::string>) opt->capture_default_str();
        entries_.push_back({key, opt, [&var](const json& j) { var = j.get<T>(); },
                            [&var] { return json(var); }});
        return opt;
    }

    CLI::Option* flag(const std::string& key, bool& var, const std::string& help) {
        auto* opt = app_->add_flag("--" + flag_name(key), var, help);
        entries_.push_back({key, opt, [&var](const json& j) { var = j.get<bool>(); },
                            [&var] { return json(var); }});
        return opt;
    }

    // Fills options not given on the command line from the config file.
    void apply_config() {
        if (config_path_.empty()) return;
        std::ifstream is(config_path_);
        if (!is) throw UsageError("cannot read config file " + config_path_);
        json cfg;
        try {
            cfg = json::parse(is);
        } catch (const json::exception& e) {
            throw UsageError("invalid config file " + config_path_ + ": " + e.what());
        }
        if (cfg.contains("settings")) cfg = cfg["settings"];
        if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
        for (const auto& [key, value] : cfg.items()) {
            const Entry* e = find(key);
            if (!e) throw UsageError("unknown config key '" + key + "'");
            if (e->opt->count() > 0) continue;
            try {
                e->load(value);
            } catch (const json::exception& ex) {
                throw UsageError("config key '" + key + "': " + ex.what());
            }
        }
    }

    json snapshot() const {
        json j = json::object();
        for (const auto& e : entries_) j[e.key] = e.dump();
        return j;
    }

private:
    struct Entry {
        std::string key;
        CLI::Option* opt;
        std::function<void(const json&)> load;
        std::function<json()> dump;
    };

    static std::string flag_name(std::string key) {
        for (auto& c : key)
            if (c == '_') c = '-';
        return key;
    }
    const Entry* find(const std::string& key) const {
        for (const auto& e : entries_)
            if (e.key == key) return &e;
        return nullptr;
    }

    CLI::App* app_;
    std::string config_path_;
    std::vector<Entry> entries_;
};

// Output directory with a config snapshot and an append-only log.
class RunDir {
public:
    RunDir(const std::string& dir, const std::string& command, const json& settings) : dir_(dir) {
        if (dir.empty()) throw UsageError("--out is required");
        fs::create_directories(dir_);
        std::ofstream(dir_ / "config.json") << json{{"command", command}, {"settings", settings}}.dump(2)
                                            << '\n';
        log_.open(dir_ / "log.txt", std::ios::app);
        log("start " + command);
    }
    fs::path path(const std::string& name) const { return dir_ / name; }
    void log(const std::string& msg) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        char ts[32];
        std::strftime(ts, sizeof ts, "%Y-%m-%dT%H:%M:%S", std::gmtime(&now));
        log_ << ts << ' ' << msg << '\n';
        log_.flush();
        std::cerr << msg << '\n';
    }

private:
    fs::path dir_;
    std::ofstream log_;
};

void write_text(const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
}

// A corpus is a JSONL file or a directory holding corpus.jsonl.
fs::path corpus_file(const std::string& path) {
    if (fs::is_directory(path)) return fs::path(path) / "corpus.jsonl";
    return path;
}

std::vector<DualTokenStream> load_corpus(const std::string& path) {
    if (path.empty()) throw UsageError("a corpus path is required");
    return read_streams_file(corpus_file(path).string());
}

// Reference report from a report JSON, a traces JSONL, or a corpus
// directory (traces.jsonl if present, otherwise segmented corpus.jsonl).
EventReport load_reference(const std::string& path, TokenId sil, double silence_ms) {
    if (path.empty()) throw UsageError("--ref is required");
    fs::path p = path;
    if (fs::is_directory(p)) {
        if (fs::exists(p / "traces.jsonl")) return report(read_traces_file((p / "traces.jsonl").string()));
        return analyze_corpus(read_streams_file((p / "corpus.jsonl").string()), sil, silence_ms);
    }
    if (p.extension() == ".json") {
        std::ifstream is(p);
        if (!is) throw std::runtime_error("cannot read " + p.string());
        return report_from_json(json::parse(is));
    }
    if (p.filename().string().find("trace") != std::string::npos) {
        return report(read_traces_file(p.string()));
    }
    return analyze_corpus(read_streams_file(p.string()), sil, silence_ms);
}

std::string temp_tag(double t) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

ModelParams load_model(const std::string& ckpt, bool tie_channels) {
    if (ckpt.empty()) throw UsageError("--ckpt is required");
    ModelParams p = load_checkpoint(ckpt).params;
    if (tie_channels) tie_channel_rows(p);
    return p;
}

// ---- subcommands -------------------------------------------------------------

struct GenData {
    std::string profile_path;
    std::size_t streams = 100;
    std::size_t frames = 2400;
    std::size_t depth = 1;
    std::uint64_t seed = 1;
    std::string out;
    DialogueProfile profile;

    void run(Settings& s) {
        if (!profile_path.empty()) {
            std::ifstream is(profile_path);
            if (!is) throw UsageError("cannot read profile " + profile_path);
            try {
                profile = profile_from_json(json::parse(is), profile);
            } catch (const json::exception& e) {
                throw UsageError("invalid profile: " + std::string(e.what()));
            }
        }
        profile.seed = seed;
        json snap = s.snapshot();
        snap["resolved_profile"] = profile_to_json(profile);
        RunDir dir(out, "gen-data", snap);
        SyntheticCorpus c = generate(profile, frames, streams);
        if (depth > 1) {
            for (auto& st : c.streams) st = to_rvq(st, depth, profile.vocab);
        }
        write_streams_file(dir.path("corpus.jsonl").string(), c.streams);
        write_traces_file(dir.path("traces.jsonl").string(), c.traces);
        const EventReport r = report(c.traces);
        write_text(dir.path("reference_report.json"), report_to_json(r).dump(2) + "\n");
        write_text(dir.path("reference_report.csv"), report_to_csv(r));
        dir.log("wrote " + std::to_string(streams) + " streams of " + std::to_string(frames) + " frames");
    }
};

struct ModelFlags {
    std::size_t d_model = 64;
    std::size_t n_layers = 2;
    std::size_t n_heads = 4;
    std::int32_t vocab = 32;
    std::size_t ffn_mult = 4;
    std::size_t max_steps = 512;
    double rope_base = 10000.0;
    std::uint64_t model_seed = 1;

    void add(Settings& s) {
        s.add("d_model", d_model, "model width");
        s.add("n_layers", n_layers, "transformer blocks");
        s.add("n_heads", n_heads, "attention heads");
        s.add("vocab", vocab, "content vocabulary size (SIL and BOS are appended)");
        s.add("ffn_mult", ffn_mult, "feed-forward expansion");
        s.add("max_steps", max_steps, "maximum pair-steps including BOS");
        s.add("rope_base", rope_base, "rotary base");
        s.add("model_seed", model_seed, "parameter initialization seed");
    }
    ModelConfig config(std::size_t depth) const {
        ModelConfig c;
        c.d_model = d_model;
        c.n_layers = n_layers;
        c.n_heads = n_heads;
        c.vocab = vocab;
        c.depth = depth;
        c.ffn_mult = ffn_mult;
        c.max_steps = max_steps;
        c.rope_base = rope_base;
        c.seed = model_seed;
        c.validate();
        return c;
    }
};

struct Train {
    std::string data;
    std::string out;
    std::string resume;
    ModelFlags model;
    TrainHyper hyper;
    std::size_t log_every = 50;

    void add(Settings& s) {
        s.add("data", data, "training corpus (JSONL file or gen-data directory)");
        s.add("out", out, "output directory");
        s.add("resume", resume, "checkpoint directory to continue from");
        model.add(s);
        s.add("lr", hyper.lr, "Adam learning rate");
        s.add("steps", hyper.steps, "optimizer steps");
        s.add("batch", hyper.batch, "crops per step");
        s.add("grad_clip", hyper.grad_clip, "global gradient-norm clip (0 disables)");
        s.add("window", hyper.window, "frames per crop");
        s.add("seed", hyper.seed, "crop sampling seed");
        s.add("log_every", log_every, "log interval in steps");
    }

    void run(Settings& s) {
        RunDir dir(out, "train", s.snapshot());
        const auto corpus = load_corpus(data);
        if (corpus.empty()) throw std::runtime_error("empty corpus");
        ModelParams params;
        std::size_t start = 0;
        std::vector<double> history;
        if (!resume.empty()) {
            Checkpoint ck = load_checkpoint(resume);
            params = std::move(ck.params);
            start = ck.step;
            history = std::move(ck.loss_history);
        } else {
            params = init_params(model.config(corpus.front().depth()));
        }
        for (const auto& st : corpus) st.validate(params.config.vocabulary());
        dir.log("parameters: " + std::to_string(params.parameter_count()));
        auto progress = [&](std::size_t step, double l) {
            if (log_every > 0 && (step % log_every == 0 || step + 1 == hyper.steps)) {
                dir.log("step " + std::to_string(start + step) + " loss " + std::to_string(l));
            }
        };
        const auto losses = train_params(params, corpus, hyper, progress);
        history.insert(history.end(), losses.begin(), losses.end());
        save_checkpoint(dir.path("checkpoint").string(), params, start + losses.size(), history);
        std::string csv = "step,loss\n";
        for (std::size_t i = 0; i < history.size(); ++i) {
            csv += std::to_string(i) + "," + std::to_string(history[i]) + "\n";
        }
        write_text(dir.path("loss.csv"), csv);
        dir.log("saved checkpoint to " + dir.path("checkpoint").string());
    }
};

struct ContinuationFlags {
    std::vector<double> temps{0.1, 0.5, 0.9};
    std::size_t prompt_frames = 40;
    std::size_t frames = 160;
    std::uint64_t seed = 1;
    std::size_t limit = 0;
    double silence_ms = default_silence_ms;

    void add(Settings& s, bool many_temps) {
        if (many_temps) {
            s.add("temp", temps, "sampling temperature (repeatable)");
        }
        s.add("prompt_frames", prompt_frames, "prompt length in frames");
        s.add("frames", frames, "frames to generate per prompt");
        s.add("seed", seed, "sampling seed");
        s.add("limit", limit, "use only the first N prompts (0 = all)");
        s.add("silence_ms", silence_ms, "analyzer silence threshold");
    }
    ContinuationConfig config(double temperature) const {
        ContinuationConfig c;
        c.prompt_frames = prompt_frames;
        c.continuation_frames = frames;
        c.temperature = temperature;
        c.seed = seed;
        c.silence_ms = silence_ms;
        return c;
    }
    std::vector<DualTokenStream> prompts(const std::string& path) const {
        auto p = load_corpus(path);
        if (limit > 0 && p.size() > limit) p.resize(limit);
        return p;
    }
};

struct Sample {
    std::string ckpt;
    std::string prompts;
    std::string out;
    ContinuationFlags cont;

    void run(Settings& s) {
        RunDir dir(out, "sample", s.snapshot());
        const ModelParams params = load_model(ckpt, false);
        const auto ps = cont.prompts(prompts);
        if (cont.temps.empty()) throw UsageError("at least one --temp is required");
        for (double t : cont.temps) {
            const auto gen = continue_corpus(params, ps, cont.config(t));
            const std::string name = "temp_" + temp_tag(t) + ".jsonl";
            write_streams_file(dir.path(name).string(), gen);
            dir.log("temperature " + temp_tag(t) + ": " + std::to_string(gen.size()) + " streams -> " + name);
        }
    }
};

struct Analyze {
    std::string gen;
    std::string ref;
    std::string out;
    std::int32_t vocab = 32;
    double silence_ms = default_silence_ms;

    void run(Settings& s) {
        RunDir dir(out, "analyze", s.snapshot());
        const TokenId sil = Vocabulary{vocab}.sil();
        const EventReport reference = load_reference(ref, sil, silence_ms);
        write_text(dir.path("reference_report.csv"), report_to_csv(reference));

        std::vector<fs::path> files;
        if (gen.empty()) throw UsageError("--gen is required");
        if (fs::is_directory(gen)) {
            for (const auto& e : fs::directory_iterator(gen)) {
                if (e.path().extension() == ".jsonl") files.push_back(e.path());
            }
            std::sort(files.begin(), files.end());
        } else {
            files.push_back(gen);
        }
        if (files.empty()) throw std::runtime_error("no .jsonl files in " + gen);
        std::string table = table_header() + "\n";
        json all = json::object();
        for (const auto& f : files) {
            const EventReport r = analyze_corpus(read_streams_file(f.string()), sil, silence_ms);
            const DeltaReport d = delta(r, reference);
            const std::string setting = f.stem().string();
            table += table_row(setting, d) + "\n";
            all[setting] = {{"report", report_to_json(r)}, {"delta", delta_to_json(d)}};
            write_text(dir.path(setting + "_report.csv"), report_to_csv(r));
        }
        write_text(dir.path("table.csv"), table);
        write_text(dir.path("reports.json"), all.dump(2) + "\n");
        std::cout << table;
        dir.log("analyzed " + std::to_string(files.size()) + " corpora");
    }
};

struct SwapEval {
    std::string ckpt;
    std::string prompts;
    std::string ref;
    std::string out;
    double temp = 0.9;
    bool tie_channels = false;
    ContinuationFlags cont;

    void run(Settings& s) {
        RunDir dir(out, "swap-eval", s.snapshot());
        const ModelParams params = load_model(ckpt, tie_channels);
        const TokenId sil = params.config.vocabulary().sil();
        const auto ps = cont.prompts(prompts);
        const EventReport reference = load_reference(ref.empty() ? prompts : ref, sil, cont.silence_ms);
        const SwapEvalResult r = swap_eval(params, ps, reference, cont.config(temp));
        std::string table = table_header() + "\n";
        table += table_row("delta_original", r.delta_original) + "\n";
        table += table_row("delta_swapped", r.delta_swapped) + "\n";
        table += table_row("robustness", r.robustness) + "\n";
        write_text(dir.path("swap_eval.csv"), table);
        write_text(dir.path("robustness.csv"), delta_to_csv(r.robustness));
        write_text(dir.path("swap_eval.json"),
                   json{{"original", report_to_json(r.original)},
                        {"swapped", report_to_json(r.swapped)},
                        {"delta_original", delta_to_json(r.delta_original)},
                        {"delta_swapped", delta_to_json(r.delta_swapped)},
                        {"robustness", delta_to_json(r.robustness)}}
                           .dump(2) +
                       "\n");
        std::cout << table;
        dir.log("swap evaluation over " + std::to_string(ps.size()) + " prompts");
    }
};

struct Converse {
    std::string ckpt;
    std::string out;
    std::string timing;
    std::size_t chunk = 5;
    bool eager = false;
    double temp = 0.8;
    std::uint64_t seed = 1;

    // Reads {"t", "ch": "a", "tokens"} lines from stdin, writes B frames as
    // {"t", "ch": "b", "tokens"} lines to stdout.
    void run(Settings& s) {
        std::unique_ptr<RunDir> dir;
        if (!out.empty()) dir = std::make_unique<RunDir>(out, "converse", s.snapshot());
        const ModelParams params = load_model(ckpt, false);
        ChunkConfig cc;
        cc.frames = chunk;
        cc.eager = eager;
        SamplingConfig sc;
        sc.temperature = temp;
        sc.seed_b = seed;
        ConversationSession session(params, cc, sc);
        std::size_t next_out = 0;
        auto emit = [&](const std::vector<std::vector<TokenId>>& frames) {
            for (const auto& f : frames) {
                std::cout << json{{"t", next_out++}, {"ch", "b"}, {"tokens", f}}.dump() << '\n';
            }
            std::cout.flush();
        };
        std::string line;
        std::size_t expected_t = 0;
        while (std::getline(std::cin, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json msg;
            try {
                msg = json::parse(line);
            } catch (const json::exception& e) {
                throw SequenceError(std::string("malformed message: ") + e.what());
            }
            if (msg.value("ch", "") != "a") throw SequenceError("user messages must have \"ch\": \"a\"");
            if (msg.contains("t") && msg["t"].get<std::size_t>() != expected_t) {
                throw SequenceError("user frames must arrive in order (expected t=" +
                                    std::to_string(expected_t) + ")");
            }
            ++expected_t;
            session.push_user_frame(msg.at("tokens").get<std::vector<TokenId>>());
            emit(session.poll());
        }
        emit(session.finish());
        std::string csv = "round,latency_ms,cache_bytes\n";
        for (const auto& r : session.rounds()) {
            csv += std::to_string(r.round) + "," + std::to_string(r.latency_ms) + "," +
                   std::to_string(r.cache_bytes) + "\n";
        }
        if (!timing.empty()) write_text(timing, csv);
        if (dir) {
            write_text(dir->path("timing.csv"), csv);
            dir->log("consumed " + std::to_string(session.consumed_frames()) + " frames, emitted " +
                     std::to_string(session.emitted_frames()));
        }
    }
};

struct Bench {
    std::string ckpt;
    std::string out;
    BenchConfig cfg;
    std::size_t chunk = 5;

    void run(Settings& s) {
        RunDir dir(out, "bench", s.snapshot());
        const ModelParams params = load_model(ckpt, false);
        cfg.chunk.frames = chunk;
        const BenchResult r = bench_latency(params, cfg);
        std::string csv = "round,latency_ms,cache_bytes,committed,expected_cache_bytes\n";
        for (const auto& row : r.rounds) {
            csv += std::to_string(row.round) + "," + std::to_string(row.latency_ms) + "," +
                   std::to_string(row.cache_bytes) + "," + std::to_string(row.committed) + "," +
                   std::to_string(expected_cache_bytes(row.committed, params.config.n_layers,
                                                       params.config.d_model)) +
                   "\n";
        }
        write_text(dir.path("latency.csv"), csv);
        std::cout << csv;
        dir.log("benchmarked " + std::to_string(r.rounds.size()) + " rounds");
    }
};

int run(int argc, char** argv) {
    CLI::App app{"Next-token-pair prediction for dual-channel dialogue token streams"};
    app.require_subcommand(1);

    GenData gen;
    auto* c_gen = app.add_subcommand("gen-data", "generate a synthetic dialogue corpus");
    Settings s_gen(c_gen);
    s_gen.add("profile", gen.profile_path, "dialogue profile JSON");
    s_gen.add("streams", gen.streams, "number of streams");
    s_gen.add("frames", gen.frames, "frames per stream");
    s_gen.add("depth", gen.depth, "tokens per frame (expanded by hashing when > 1)");
    s_gen.add("seed", gen.seed, "corpus seed");
    s_gen.add("out", gen.out, "output directory");

    Train tr;
    auto* c_train = app.add_subcommand("train", "train a model on a corpus");
    Settings s_train(c_train);
    tr.add(s_train);

    Sample sm;
    auto* c_sample = app.add_subcommand("sample", "continue prompts at one or more temperatures");
    Settings s_sample(c_sample);
    s_sample.add("ckpt", sm.ckpt, "checkpoint directory");
    s_sample.add("prompts", sm.prompts, "prompt corpus");
    s_sample.add("out", sm.out, "output directory");
    sm.cont.add(s_sample, true);

    Analyze an;
    auto* c_analyze = app.add_subcommand("analyze", "turn-taking statistics against a reference");
    Settings s_analyze(c_analyze);
    s_analyze.add("gen", an.gen, "generated corpus file or directory of .jsonl files");
    s_analyze.add("ref", an.ref, "reference: corpus directory, traces JSONL, corpus JSONL or report JSON");
    s_analyze.add("out", an.out, "output directory");
    s_analyze.add("vocab", an.vocab, "content vocabulary size (SIL = vocab)");
    s_analyze.add("silence_ms", an.silence_ms, "silence threshold");

    SwapEval sw;
    auto* c_swap = app.add_subcommand("swap-eval", "speaker-swap robustness of a model");
    Settings s_swap(c_swap);
    s_swap.add("ckpt", sw.ckpt, "checkpoint directory");
    s_swap.add("prompts", sw.prompts, "prompt corpus");
    s_swap.add("ref", sw.ref, "reference (defaults to the prompt corpus)");
    s_swap.add("out", sw.out, "output directory");
    s_swap.add("temp", sw.temp, "sampling temperature");
    s_swap.flag("tie_channels", sw.tie_channels, "set the B channel embedding equal to A");
    sw.cont.add(s_swap, false);

    Converse cv;
    auto* c_conv = app.add_subcommand("converse", "stream user frames on stdin, answer on stdout");
    Settings s_conv(c_conv);
    s_conv.add("ckpt", cv.ckpt, "checkpoint directory");
    s_conv.add("out", cv.out, "optional output directory");
    s_conv.add("timing", cv.timing, "optional timing CSV path");
    s_conv.add("chunk", cv.chunk, "frames per chunk")->check(CLI::PositiveNumber);
    s_conv.flag("eager", cv.eager, "respond to every user frame immediately");
    s_conv.add("temp", cv.temp, "sampling temperature");
    s_conv.add("seed", cv.seed, "sampling seed");

    Bench bn;
    auto* c_bench = app.add_subcommand("bench", "per-round latency and cache memory");
    Settings s_bench(c_bench);
    s_bench.add("ckpt", bn.ckpt, "checkpoint directory");
    s_bench.add("out", bn.out, "output directory");
    s_bench.add("rounds", bn.cfg.rounds, "measured rounds");
    s_bench.add("chunk", bn.chunk, "frames per chunk")->check(CLI::PositiveNumber);
    s_bench.add("warmup", bn.cfg.warmup_rounds, "discarded warmup rounds");
    s_bench.add("temp", bn.cfg.temperature, "sampling temperature");
    s_bench.add("seed", bn.cfg.seed, "seed for user frames and sampling");

    std::size_t mask_t = 4, mask_d = 2;
    auto* c_mask = app.add_subcommand("dump-mask", "print the attention mask as a 0/1 grid");
    Settings s_mask(c_mask);
    s_mask.add("T", mask_t, "pair-steps")->check(CLI::PositiveNumber);
    s_mask.add("D", mask_d, "depth")->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    struct Command {
        CLI::App* app;
        Settings* settings;
        std::function<void()> run;
    };
    const std::vector<Command> commands = {
        {c_gen, &s_gen, [&] { gen.run(s_gen); }},
        {c_train, &s_train, [&] { tr.run(s_train); }},
        {c_sample, &s_sample, [&] { sm.run(s_sample); }},
        {c_analyze, &s_analyze, [&] { an.run(s_analyze); }},
        {c_swap, &s_swap, [&] { sw.run(s_swap); }},
        {c_conv, &s_conv, [&] { cv.run(s_conv); }},
        {c_bench, &s_bench, [&] { bn.run(s_bench); }},
        {c_mask, &s_mask, [&] { std::cout << build_mask(mask_t, mask_d).to_text(); }},
    };
    for (const auto& c : commands) {
        if (!c.app->parsed()) continue;
        c.settings->apply_config();
        c.run();
    }
    return 0;
}

void report_error(const char* kind, const std::string& message) {
    std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const UsageError& e) {
        report_error("usage", e.what());
        return 2;
    } catch (const std::exception& e) {
        report_error("runtime", e.what());
        return 1;
    }
}
