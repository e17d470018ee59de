#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "sidq/adaptive.hpp"
#include "sidq/error.hpp"
#include "sidq/io.hpp"
#include "sidq/kernels.hpp"
#include "sidq/metrics.hpp"
#include "sidq/sid_index.hpp"
#include "sidq/synthetic.hpp"
#include "sidq/train.hpp"
#include "sidq/types.hpp"

namespace {

using KvMap = std::map<std::string, std::string>;

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Flat key=value config: one pair per line, '#' starts a comment,
// blank lines ignored. Keys outside `allowed` are rejected so typos
// fail loudly instead of silently keeping a default.
KvMap read_kv_file(const std::string& path, const std::set<std::string>& allowed) {
    std::ifstream in(path);
    if (!in) throw sidq::ConfigError("cannot open config file: " + path);
    KvMap kv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos) {
            throw sidq::ConfigError(path + ":" + std::to_string(lineno) +
                                    ": expected key=value, got \"" + t + "\"");
        }
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw sidq::ConfigError(path + ":" + std::to_string(lineno) +
                                    ": empty key or value");
        }
        if (!allowed.count(key)) {
            throw sidq::ConfigError(path + ":" + std::to_string(lineno) + ": unknown key \"" +
                                    key + "\"");
        }
        if (kv.count(key)) {
            throw sidq::ConfigError(path + ":" + std::to_string(lineno) + ": duplicate key \"" +
                                    key + "\"");
        }
        kv[key] = value;
    }
    return kv;
}

std::uint64_t parse_u64(const std::string& value, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(value.c_str(), &end, 10);
    if (errno != 0 || end == value.c_str() || *end != '\0' || value[0] == '-') {
        throw sidq::ConfigError(key + ": expected a nonnegative integer, got \"" + value + "\"");
    }
    return v;
}

double parse_double(const std::string& value, const std::string& key) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(value.c_str(), &end);
    if (errno != 0 || end == value.c_str() || *end != '\0') {
        throw sidq::ConfigError(key + ": expected a real number, got \"" + value + "\"");
    }
    return v;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw sidq::ConfigError(key + ": expected 0/1/true/false, got \"" + value + "\"");
}

std::vector<std::uint32_t> parse_sizes(const std::string& value, const std::string& key) {
    std::vector<std::uint32_t> sizes;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        const std::size_t comma = std::min(value.find(',', pos), value.size());
        const std::uint64_t v = parse_u64(trim(value.substr(pos, comma - pos)), key);
        if (v > UINT32_MAX) throw sidq::ConfigError(key + ": size out of range");
        sizes.push_back(static_cast<std::uint32_t>(v));
        pos = comma + 1;
    }
    return sizes;
}

std::vector<double> parse_doubles(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= value.size()) {
        const std::size_t comma = std::min(value.find(',', pos), value.size());
        out.push_back(parse_double(trim(value.substr(pos, comma - pos)), key));
        pos = comma + 1;
    }
    return out;
}

sidq::TrainConfig::Mode parse_mode(const std::string& value) {
    if (value == "gradient") return sidq::TrainConfig::Mode::gradient;
    if (value == "kmeans-ema" || value == "kmeans_ema") return sidq::TrainConfig::Mode::kmeans_ema;
    throw sidq::ConfigError("mode: expected gradient or kmeans-ema, got \"" + value + "\"");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw sidq::ConfigError("cannot create output directory " + dir + ": " + ec.message());
}

// Keeps only the rows of emb whose item has the wanted segment label;
// row order is preserved. Every embedded item must be labeled.
sidq::EmbeddingMatrix subset_by_segment(const sidq::EmbeddingMatrix& emb,
                                        const std::vector<sidq::ItemMeta>& meta,
                                        sidq::Segment want) {
    std::unordered_map<sidq::ItemId, sidq::Segment> seg;
    seg.reserve(meta.size());
    for (const sidq::ItemMeta& m : meta) seg[m.item_id] = m.segment;
    sidq::EmbeddingMatrix out;
    out.d = emb.d;
    for (std::size_t i = 0; i < emb.size(); ++i) {
        const auto it = seg.find(emb.item_ids[i]);
        if (it == seg.end()) {
            char buf[96];
            std::snprintf(buf, sizeof buf, "item %llu has no popularity entry",
                          static_cast<unsigned long long>(emb.item_ids[i]));
            throw sidq::FormatError(buf);
        }
        if (it->second != want) continue;
        out.item_ids.push_back(emb.item_ids[i]);
        out.data.insert(out.data.end(), emb.row(i), emb.row(i) + emb.d);
    }
    return out;
}

std::vector<sidq::io::AssignmentRecord> to_records(const sidq::EmbeddingMatrix& emb,
                                               std::span<const sidq::QuantizationResult> results) {
    std::vector<sidq::io::AssignmentRecord> records(results.size());
    for (std::size_t i = 0; i < results.size(); ++i) {
        records[i].item_id = emb.item_ids[i];
        records[i].sid = results[i].sid;
        records[i].reconstruction_error = results[i].reconstruction_error;
        records[i].path_information = results[i].path_information;
        records[i].terminated_early = results[i].terminated_early;
    }
    return records;
}

std::vector<sidq::Assignment> to_assignments(std::span<const sidq::io::AssignmentRecord> records) {
    std::vector<sidq::Assignment> out(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        out[i].item_id = records[i].item_id;
        out[i].sid = records[i].sid;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shared training flags: compiled defaults, overridden by the config
// file, overridden again by any flag the user actually passed.
// ---------------------------------------------------------------------------

struct TrainCli {
    std::string config_path;
    std::string sizes = "64,128,256";
    std::string mode = "gradient";
    double tau = 2e-6;
    std::uint64_t n_check = 2;
    std::uint64_t epochs = 10;
    std::uint64_t seed = 1;
    double beta = 0.25;
    double learning_rate = 0.1;
    double ema_decay = 0.5;
    std::uint64_t batch_size = 256;
    std::uint64_t warmup_epochs = 2;
    std::uint64_t dead_threshold = 1;
    bool pinned_zero = false;
    bool weak_monotone = false;
    bool fixed = false;
    double head_fraction = 0.01;

    CLI::Option* o_sizes = nullptr;
    CLI::Option* o_mode = nullptr;
    CLI::Option* o_tau = nullptr;
    CLI::Option* o_n_check = nullptr;
    CLI::Option* o_epochs = nullptr;
    CLI::Option* o_seed = nullptr;
    CLI::Option* o_beta = nullptr;
    CLI::Option* o_learning_rate = nullptr;
    CLI::Option* o_ema_decay = nullptr;
    CLI::Option* o_batch_size = nullptr;
    CLI::Option* o_warmup = nullptr;
    CLI::Option* o_dead = nullptr;
    CLI::Option* o_pinned = nullptr;
    CLI::Option* o_weak = nullptr;
    CLI::Option* o_fraction = nullptr;
};

const std::set<std::string>& train_keys() {
    static const std::set<std::string> keys = {
        "sizes",         "full_size",     "beta",
        "mode",          "learning_rate", "ema_decay",
        "epochs",        "batch_size",    "seed",
        "dead_code_threshold", "pinned_zero", "strict_monotone",
        "warmup_epochs", "tau",           "n_check",
        "head_fraction"};
    return keys;
}

void add_train_flags(CLI::App* cmd, TrainCli& f, bool with_sizes) {
    cmd->add_option("--config", f.config_path, "key=value config file (flags override)");
    if (with_sizes) {
        f.o_sizes = cmd->add_option("--sizes", f.sizes, "per-layer codebook sizes, e.g. 64,128,256");
    }
    f.o_mode = cmd->add_option("--mode", f.mode, "update rule: gradient or kmeans-ema");
    f.o_tau = cmd->add_option("--tau", f.tau, "termination threshold on prefix ratio");
    f.o_n_check = cmd->add_option("--n-check", f.n_check, "shortest id length eligible to stop");
    f.o_epochs = cmd->add_option("--epochs", f.epochs, "training epochs");
    f.o_seed = cmd->add_option("--seed", f.seed, "rng seed");
    f.o_beta = cmd->add_option("--beta", f.beta, "commitment loss weight");
    f.o_learning_rate = cmd->add_option("--learning-rate", f.learning_rate, "gradient step size");
    f.o_ema_decay = cmd->add_option("--ema-decay", f.ema_decay, "EMA retention factor");
    f.o_batch_size = cmd->add_option("--batch-size", f.batch_size, "minibatch size");
    f.o_warmup = cmd->add_option("--warmup-epochs", f.warmup_epochs,
                                 "EMA epochs before gradient mode kicks in");
    f.o_dead = cmd->add_option("--dead-threshold", f.dead_threshold,
                               "min assignments per epoch before a centroid is reseeded");
    f.o_pinned = cmd->add_flag("--pinned-zero", f.pinned_zero,
                               "pin a frozen all-zero centroid at index 0 of every layer");
    f.o_weak = cmd->add_flag("--weak-monotone", f.weak_monotone,
                             "allow equal consecutive layer sizes");
    f.o_fraction = cmd->add_option("--head-fraction", f.head_fraction,
                                   "top fraction by interactions labeled head");
    cmd->add_flag("--fixed", f.fixed, "train at full depth (no early termination)");
}

struct TrainSetup {
    sidq::TrainConfig cfg;
    sidq::TerminationPolicy policy;
    double head_fraction = 0.01;
};

TrainSetup build_setup(const TrainCli& f) {
    TrainSetup s;
    double tau = 2e-6;
    std::uint32_t n_check = 2;
    if (!f.config_path.empty()) {
        const KvMap kv = read_kv_file(f.config_path, train_keys());
        const auto has = [&](const char* k) { return kv.count(k) != 0; };
        const auto val = [&](const char* k) { return kv.at(k); };
        if (has("sizes")) s.cfg.head_sizes = parse_sizes(val("sizes"), "sizes");
        if (has("full_size"))
            s.cfg.full_size = static_cast<std::uint32_t>(parse_u64(val("full_size"), "full_size"));
        if (has("beta")) s.cfg.beta = parse_double(val("beta"), "beta");
        if (has("mode")) s.cfg.mode = parse_mode(val("mode"));
        if (has("learning_rate"))
            s.cfg.learning_rate = parse_double(val("learning_rate"), "learning_rate");
        if (has("ema_decay")) s.cfg.ema_decay = parse_double(val("ema_decay"), "ema_decay");
        if (has("epochs"))
            s.cfg.epochs = static_cast<std::uint32_t>(parse_u64(val("epochs"), "epochs"));
        if (has("batch_size"))
            s.cfg.batch_size =
                static_cast<std::uint32_t>(parse_u64(val("batch_size"), "batch_size"));
        if (has("seed")) s.cfg.seed = parse_u64(val("seed"), "seed");
        if (has("dead_code_threshold"))
            s.cfg.dead_code_threshold = parse_u64(val("dead_code_threshold"),
                                                  "dead_code_threshold");
        if (has("pinned_zero")) s.cfg.pinned_zero = parse_bool(val("pinned_zero"), "pinned_zero");
        if (has("strict_monotone"))
            s.cfg.strict_monotone = parse_bool(val("strict_monotone"), "strict_monotone");
        if (has("warmup_epochs"))
            s.cfg.warmup_epochs =
                static_cast<std::uint32_t>(parse_u64(val("warmup_epochs"), "warmup_epochs"));
        if (has("tau")) tau = parse_double(val("tau"), "tau");
        if (has("n_check"))
            n_check = static_cast<std::uint32_t>(parse_u64(val("n_check"), "n_check"));
        if (has("head_fraction"))
            s.head_fraction = parse_double(val("head_fraction"), "head_fraction");
    }
    const auto given = [](const CLI::Option* o) { return o != nullptr && o->count() > 0; };
    if (given(f.o_sizes)) s.cfg.head_sizes = parse_sizes(f.sizes, "--sizes");
    if (given(f.o_mode)) s.cfg.mode = parse_mode(f.mode);
    if (given(f.o_beta)) s.cfg.beta = f.beta;
    if (given(f.o_learning_rate)) s.cfg.learning_rate = f.learning_rate;
    if (given(f.o_ema_decay)) s.cfg.ema_decay = f.ema_decay;
    if (given(f.o_epochs)) s.cfg.epochs = static_cast<std::uint32_t>(f.epochs);
    if (given(f.o_batch_size)) s.cfg.batch_size = static_cast<std::uint32_t>(f.batch_size);
    if (given(f.o_seed)) s.cfg.seed = f.seed;
    if (given(f.o_dead)) s.cfg.dead_code_threshold = f.dead_threshold;
    if (given(f.o_pinned)) s.cfg.pinned_zero = f.pinned_zero;
    if (given(f.o_weak)) s.cfg.strict_monotone = !f.weak_monotone;
    if (given(f.o_warmup)) s.cfg.warmup_epochs = static_cast<std::uint32_t>(f.warmup_epochs);
    if (given(f.o_tau)) tau = f.tau;
    if (given(f.o_n_check)) n_check = static_cast<std::uint32_t>(f.n_check);
    if (given(f.o_fraction)) s.head_fraction = f.head_fraction;

    s.policy = f.fixed ? sidq::TerminationPolicy::fixed_depth()
                       : sidq::TerminationPolicy::ratio_policy(tau, n_check);
    return s;
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

void run_gen_data(const std::string& spec_path, const std::string& out_dir,
                  const CLI::Option* o_seed, std::uint64_t seed) {
    sidq::SyntheticSpec spec;
    if (!spec_path.empty()) {
        static const std::set<std::string> keys = {"n_items",     "d",
                                                   "n_clusters",  "zipf_exponent",
                                                   "cluster_std", "head_fraction",
                                                   "seed"};
        const KvMap kv = read_kv_file(spec_path, keys);
        if (kv.count("n_items")) spec.n_items = parse_u64(kv.at("n_items"), "n_items");
        if (kv.count("d")) spec.d = static_cast<std::uint32_t>(parse_u64(kv.at("d"), "d"));
        if (kv.count("n_clusters"))
            spec.n_clusters = static_cast<std::uint32_t>(parse_u64(kv.at("n_clusters"),
                                                                   "n_clusters"));
        if (kv.count("zipf_exponent"))
            spec.zipf_exponent = parse_double(kv.at("zipf_exponent"), "zipf_exponent");
        if (kv.count("cluster_std"))
            spec.cluster_std = parse_double(kv.at("cluster_std"), "cluster_std");
        if (kv.count("head_fraction"))
            spec.head_fraction = parse_double(kv.at("head_fraction"), "head_fraction");
        if (kv.count("seed")) spec.seed = parse_u64(kv.at("seed"), "seed");
    }
    if (o_seed->count() > 0) spec.seed = seed;
    const sidq::SyntheticData data = sidq::generate_synthetic(spec);
    ensure_dir(out_dir);
    sidq::io::write_embeddings(out_dir + "/embeddings.aemb", data.embeddings);
    sidq::io::write_meta(out_dir + "/meta.tsv", data.meta);
    const double share = sidq::top_share(data.meta, spec.head_fraction);
    std::printf("wrote %llu items (d=%u, %u clusters) to %s\n",
                static_cast<unsigned long long>(spec.n_items), spec.d, spec.n_clusters,
                out_dir.c_str());
    std::printf("top %.2f%% of items carry %.2f%% of interactions\n", 100.0 * spec.head_fraction,
                100.0 * share);
}

void run_train_head(const TrainCli& f, const std::string& emb_path, const std::string& meta_path,
                    const std::string& out_dir) {
    const TrainSetup s = build_setup(f);
    const sidq::EmbeddingMatrix emb = sidq::io::read_embeddings(emb_path);
    std::vector<sidq::ItemMeta> meta = sidq::io::read_meta(meta_path);
    sidq::split_head_tail(meta, s.head_fraction);
    const sidq::EmbeddingMatrix head = subset_by_segment(emb, meta, sidq::Segment::head);
    if (head.size() == 0) throw sidq::ConfigError("no head items under the given head fraction");
    std::printf("training on %zu head items (of %zu)\n", head.size(), emb.size());
    const sidq::TrainOutput out = sidq::train_head(head, s.cfg, s.policy, &std::cout);
    ensure_dir(out_dir);
    sidq::io::write_codebooks(out_dir + "/codebooks.acbk", out.stack);
    sidq::io::write_prefix_table(out_dir + "/table.aptb", out.table);
    std::printf("wrote %s/codebooks.acbk and %s/table.aptb\n", out_dir.c_str(), out_dir.c_str());
}

void run_train_tail(const TrainCli& f, const std::string& emb_path, const std::string& meta_path,
                    const std::string& head_cbk, const std::string& head_tbl,
                    const CLI::Option* o_full, std::uint64_t full_size,
                    const std::string& out_dir) {
    TrainSetup s = build_setup(f);
    const sidq::EmbeddingMatrix emb = sidq::io::read_embeddings(emb_path);
    std::vector<sidq::ItemMeta> meta = sidq::io::read_meta(meta_path);
    const sidq::CodebookStack head_stack = sidq::io::read_codebooks(head_cbk);
    const sidq::PrefixTable head_table = sidq::io::read_prefix_table(head_tbl);
    sidq::split_head_tail(meta, s.head_fraction);
    const sidq::EmbeddingMatrix tail = subset_by_segment(emb, meta, sidq::Segment::tail);
    if (tail.size() == 0) throw sidq::ConfigError("no tail items under the given head fraction");

    s.cfg.head_sizes.clear();
    for (const sidq::CodebookLayer& layer : head_stack.layers) s.cfg.head_sizes.push_back(layer.m);
    s.cfg.strict_monotone = false;  // sizes come from the artifact, not the user
    s.cfg.full_size = o_full->count() > 0 ? static_cast<std::uint32_t>(full_size)
                                          : s.cfg.head_sizes.back();
    std::printf("training on %zu tail items (of %zu), extending to %u\n", tail.size(), emb.size(),
                s.cfg.resolved_full_size());
    const sidq::CodebookStack hybrid = sidq::extend_codebooks(head_stack, s.cfg, &tail);
    const sidq::CodebookStack full =
        sidq::train_tail(tail, hybrid, head_table, s.cfg, s.policy, &std::cout);
    ensure_dir(out_dir);
    sidq::io::write_codebooks(out_dir + "/codebooks.acbk", full);
    std::printf("wrote %s/codebooks.acbk\n", out_dir.c_str());
}

void run_assign(const std::string& emb_path, const std::string& cbk_path,
                const std::string& tbl_path, bool fixed, double tau, std::uint64_t n_check,
                unsigned threads, const std::string& out_path, const std::string& table_out) {
    const sidq::EmbeddingMatrix emb = sidq::io::read_embeddings(emb_path);
    const sidq::CodebookStack stack = sidq::io::read_codebooks(cbk_path);
    sidq::PrefixTable table;
    if (!fixed) {
        if (tbl_path.empty()) {
            throw sidq::ConfigError("--table is required unless --fixed is given");
        }
        table = sidq::io::read_prefix_table(tbl_path);
    }
    const sidq::TerminationPolicy policy =
        fixed ? sidq::TerminationPolicy::fixed_depth()
              : sidq::TerminationPolicy::ratio_policy(tau, static_cast<std::uint32_t>(n_check));
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<sidq::QuantizationResult> results =
        sidq::assign_corpus(emb, stack, table, policy, threads);
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::vector<sidq::io::AssignmentRecord> records = to_records(emb, results);
    sidq::io::write_assignments(out_path, records);
    if (!table_out.empty()) {
        const std::vector<sidq::Assignment> assigns = to_assignments(records);
        sidq::io::write_prefix_table(table_out,
                                 sidq::PrefixTable::build(assigns, stack.depth()));
    }
    std::printf("assigned %zu items in %.2f s (%s backend) -> %s\n", emb.size(), secs,
                sidq::kernels::backend_name(sidq::kernels::active_backend()), out_path.c_str());
}

void run_stats(const std::string& assign_path, const std::string& meta_path, double head_fraction,
               bool as_json) {
    const std::vector<sidq::io::AssignmentRecord> records = sidq::io::read_assignments(assign_path);
    const std::vector<sidq::Assignment> assigns = to_assignments(records);
    std::vector<sidq::ItemMeta> meta;
    if (!meta_path.empty()) {
        meta = sidq::io::read_meta(meta_path);
        sidq::split_head_tail(meta, head_fraction);
    }
    const std::string out =
        as_json ? sidq::stats_json(assigns, meta) : sidq::stats_text(assigns, meta);
    std::fputs(out.c_str(), stdout);
}

void run_sweep(const std::string& emb_path, const std::string& cbk_path,
               const std::string& tbl_path, const std::string& taus_str, std::uint64_t n_check,
               unsigned threads) {
    const sidq::EmbeddingMatrix emb = sidq::io::read_embeddings(emb_path);
    const sidq::CodebookStack stack = sidq::io::read_codebooks(cbk_path);
    const sidq::PrefixTable table = sidq::io::read_prefix_table(tbl_path);
    const std::vector<double> taus = parse_doubles(taus_str, "--taus");
    const sidq::TerminationPolicy base =
        sidq::TerminationPolicy::ratio_policy(taus.front(), static_cast<std::uint32_t>(n_check));
    const sidq::SweepReport report = sidq::tau_sweep(emb, stack, table, base, taus, threads);
    std::printf("tau\ttruncated_fraction\tdistinct_sids\tmean_items_per_sid\tlengths\n");
    for (const sidq::SweepRow& row : report.rows) {
        std::string lengths;
        for (const auto& [len, count] : row.length_histogram) {
            if (!lengths.empty()) lengths += ",";
            lengths += std::to_string(len) + ":" + std::to_string(count);
        }
        std::printf("%.9g\t%.6f\t%llu\t%.4f\t%s\n", row.tau, row.truncated_fraction,
                    static_cast<unsigned long long>(row.distinct_sids), row.mean_items_per_sid,
                    lengths.c_str());
    }
}

void run_hallu(const std::string& assign_path, std::uint64_t samples, std::uint64_t length,
               std::uint64_t seed, std::uint64_t batch) {
    if (samples == 0) throw sidq::ConfigError("--samples must be positive");
    if (batch == 0) throw sidq::ConfigError("--batch must be positive");
    const std::vector<sidq::io::AssignmentRecord> records = sidq::io::read_assignments(assign_path);
    const std::vector<sidq::Assignment> assigns = to_assignments(records);
    const sidq::SidIndex index = sidq::SidIndex::build(assigns);
    const sidq::PrefixTable table = sidq::PrefixTable::build(assigns, index.max_length());
    const std::uint32_t use_length =
        length == 0 ? index.max_length() : static_cast<std::uint32_t>(length);
    const std::vector<sidq::SemanticId> loose =
        sidq::sample_unconstrained(table, samples, use_length, seed);
    const std::vector<sidq::SemanticId> tight = index.sample_constrained(samples, seed);
    std::vector<std::vector<sidq::SemanticId>> batches;
    for (std::size_t i = 0; i < loose.size(); i += batch) {
        batches.emplace_back(loose.begin() + i,
                             loose.begin() + std::min(loose.size(), i + batch));
    }
    std::printf("unconstrained_hallucination_rate %.6f\n",
                sidq::hallucination_rate(loose, index));
    std::printf("constrained_hallucination_rate %.6f\n",
                sidq::hallucination_rate(tight, index));
    std::printf("ret_per %.4f\n", sidq::ret_per(batches, index));
}

const char* class_name(sidq::ErrorClass cls) {
    switch (cls) {
        case sidq::ErrorClass::config: return "config";
        case sidq::ErrorClass::format: return "format";
        case sidq::ErrorClass::numeric: return "numeric";
        case sidq::ErrorClass::internal: return "internal";
    }
    return "internal";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"semantic id quantization toolkit"};
    app.require_subcommand(1);

    // gen-data
    auto* gen = app.add_subcommand("gen-data", "generate a synthetic long-tail corpus");
    std::string gen_spec, gen_out;
    std::uint64_t gen_seed = 42;
    gen->add_option("--spec", gen_spec, "key=value corpus spec file");
    gen->add_option("--out", gen_out, "output directory")->required();
    CLI::Option* gen_o_seed = gen->add_option("--seed", gen_seed, "rng seed");
    gen->callback([&] { run_gen_data(gen_spec, gen_out, gen_o_seed, gen_seed); });

    // train-head
    auto* th = app.add_subcommand("train-head", "stage 1: curriculum codebooks on head items");
    TrainCli th_cli;
    std::string th_emb, th_meta, th_out;
    th->add_option("--emb", th_emb, "embeddings (.aemb)")->required();
    th->add_option("--meta", th_meta, "popularity TSV")->required();
    th->add_option("--out", th_out, "output directory")->required();
    add_train_flags(th, th_cli, /*with_sizes=*/true);
    th->callback([&] { run_train_head(th_cli, th_emb, th_meta, th_out); });

    // train-tail
    auto* tt = app.add_subcommand("train-tail",
                                  "stage 2: anchored extension training on tail items");
    TrainCli tt_cli;
    std::string tt_emb, tt_meta, tt_cbk, tt_tbl, tt_out;
    std::uint64_t tt_full = 0;
    tt->add_option("--emb", tt_emb, "embeddings (.aemb)")->required();
    tt->add_option("--meta", tt_meta, "popularity TSV")->required();
    tt->add_option("--head-codebooks", tt_cbk, "stage-1 codebooks (.acbk)")->required();
    tt->add_option("--head-table", tt_tbl, "stage-1 prefix table (.aptb)")->required();
    CLI::Option* tt_o_full = tt->add_option("--full-size", tt_full, "hybrid codebook size");
    tt->add_option("--out", tt_out, "output directory")->required();
    add_train_flags(tt, tt_cli, /*with_sizes=*/false);
    tt->callback([&] {
        run_train_tail(tt_cli, tt_emb, tt_meta, tt_cbk, tt_tbl, tt_o_full, tt_full, tt_out);
    });

    // assign
    auto* as = app.add_subcommand("assign", "quantize a corpus to semantic ids");
    std::string as_emb, as_cbk, as_tbl, as_out, as_tbl_out;
    double as_tau = 2e-6;
    std::uint64_t as_ncheck = 2;
    unsigned as_threads = 0;
    bool as_fixed = false;
    as->add_option("--emb", as_emb, "embeddings (.aemb)")->required();
    as->add_option("--codebooks", as_cbk, "codebooks (.acbk)")->required();
    as->add_option("--table", as_tbl, "prefix table (.aptb); required unless --fixed");
    as->add_option("--tau", as_tau, "termination threshold on prefix ratio");
    as->add_option("--n-check", as_ncheck, "shortest id length eligible to stop");
    as->add_option("--threads", as_threads, "worker threads (0 = all cores)");
    as->add_flag("--fixed", as_fixed, "full-depth ids (no early termination)");
    as->add_option("--out", as_out, "assignment TSV path")->required();
    as->add_option("--table-out", as_tbl_out, "also write the prefix table of the emitted ids");
    as->callback([&] {
        run_assign(as_emb, as_cbk, as_tbl, as_fixed, as_tau, as_ncheck, as_threads, as_out,
                   as_tbl_out);
    });

    // stats
    auto* st = app.add_subcommand("stats", "id-space distribution statistics");
    std::string st_assign, st_meta;
    double st_fraction = 0.01;
    bool st_json = false;
    st->add_option("--assignments", st_assign, "assignment TSV")->required();
    st->add_option("--meta", st_meta, "popularity TSV (enables per-segment stats)");
    st->add_option("--head-fraction", st_fraction, "top fraction by interactions labeled head");
    st->add_flag("--json", st_json, "machine-readable output");
    st->callback([&] { run_stats(st_assign, st_meta, st_fraction, st_json); });

    // sweep
    auto* sw = app.add_subcommand("sweep", "id granularity as a function of tau");
    std::string sw_emb, sw_cbk, sw_tbl, sw_taus = "5e-7,1e-6,2e-6";
    std::uint64_t sw_ncheck = 2;
    unsigned sw_threads = 0;
    sw->add_option("--emb", sw_emb, "embeddings (.aemb)")->required();
    sw->add_option("--codebooks", sw_cbk, "codebooks (.acbk)")->required();
    sw->add_option("--table", sw_tbl, "prefix table (.aptb)")->required();
    sw->add_option("--taus", sw_taus, "comma-separated tau values");
    sw->add_option("--n-check", sw_ncheck, "shortest id length eligible to stop");
    sw->add_option("--threads", sw_threads, "worker threads (0 = all cores)");
    sw->callback([&] { run_sweep(sw_emb, sw_cbk, sw_tbl, sw_taus, sw_ncheck, sw_threads); });

    // hallu
    auto* ha = app.add_subcommand("hallu", "hallucination and retrieval accounting");
    std::string ha_assign;
    std::uint64_t ha_samples = 10000, ha_length = 0, ha_seed = 7, ha_batch = 32;
    ha->add_option("--assignments", ha_assign, "assignment TSV")->required();
    ha->add_option("--samples", ha_samples, "ids to sample");
    ha->add_option("--length", ha_length, "sampled id length (0 = the corpus maximum)");
    ha->add_option("--seed", ha_seed, "rng seed");
    ha->add_option("--batch", ha_batch, "batch size for ret-per accounting");
    ha->callback([&] { run_hallu(ha_assign, ha_samples, ha_length, ha_seed, ha_batch); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const sidq::Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", class_name(e.cls()), e.what());
        return static_cast<int>(e.cls());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: internal: %s\n", e.what());
        return 1;
    }
    return 0;
}
