#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "han/analysis.hpp"
#include "han/baseline.hpp"
#include "han/corpus.hpp"
#include "han/lexicon.hpp"
#include "han/model.hpp"
#include "han/synth.hpp"
#include "han/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace han;

namespace {

// Thrown for anything the user can fix in the config; maps to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json load_json_file(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(std::string("config: cannot open ") + what + " '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + what + " '" + path +
                          "' is not valid JSON: " + e.what());
    }
}

std::string need_string(const json& v, const std::string& key) {
    if (!v.is_string())
        throw ConfigError("config: field '" + key + "' must be a string");
    return v.get<std::string>();
}

bool need_bool(const json& v, const std::string& key) {
    if (!v.is_boolean())
        throw ConfigError("config: field '" + key + "' must be a boolean");
    return v.get<bool>();
}

double need_number(const json& v, const std::string& key) {
    if (!v.is_number())
        throw ConfigError("config: field '" + key + "' must be a number");
    return v.get<double>();
}

std::size_t need_size(const json& v, const std::string& key) {
    if (!v.is_number_integer() || v.get<long long>() < 0)
        throw ConfigError("config: field '" + key + "' must be a non-negative integer");
    return v.get<std::size_t>();
}

struct RunConfig {
    training::TrainConfig train;
    std::string corpus_path;
    std::optional<std::string> embeddings_path;
    std::vector<std::string> lexica_paths;
    std::string output_dir;
    std::string checkpoint_path;
    bool scale_lexica = false;
    int phq8_threshold = 10;
    std::vector<analysis::CategoryRef> categories = analysis::default_categories();
    std::size_t gc_samples = 256;
    double gc_h = 1e-5;
    json echo;  // the merged config, embedded in every report
};

std::vector<analysis::CategoryRef> parse_categories(const json& v) {
    if (!v.is_object())
        throw ConfigError(
            "config: field 'categories' must map labels to 'lexicon.category'");
    std::vector<analysis::CategoryRef> out;
    for (auto it = v.begin(); it != v.end(); ++it) {
        std::string target = need_string(it.value(), "categories." + it.key());
        auto dot = target.find('.');
        if (dot == std::string::npos || dot == 0 || dot + 1 == target.size())
            throw ConfigError("config: field 'categories." + it.key() +
                              "' must look like 'lexicon.category'");
        out.push_back({it.key(), target.substr(0, dot), target.substr(dot + 1)});
    }
    if (out.empty()) throw ConfigError("config: field 'categories' is empty");
    return out;
}

RunConfig config_from_merged(const json& merged) {
    RunConfig cfg;
    for (auto it = merged.begin(); it != merged.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "model") {
            cfg.train.model = need_string(v, key);
        } else if (key == "view") {
            auto name = need_string(v, key);
            auto view = corpus::view_from_name(name);
            if (!view)
                throw ConfigError("config: field 'view' must be one of client, "
                                  "therapist, both (got '" + name + "')");
            cfg.train.view = *view;
        } else if (key == "folds") {
            cfg.train.folds = need_size(v, key);
        } else if (key == "max_epochs") {
            cfg.train.max_epochs = need_size(v, key);
        } else if (key == "lr") {
            cfg.train.lr = need_number(v, key);
        } else if (key == "dropout") {
            cfg.train.dropout = need_number(v, key);
        } else if (key == "patience") {
            cfg.train.patience = need_size(v, key);
        } else if (key == "seed") {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                throw ConfigError("config: field 'seed' must be a non-negative integer");
            cfg.train.seed = v.get<std::uint64_t>();
        } else if (key == "hidden") {
            cfg.train.hidden = need_size(v, key);
        } else if (key == "attn_dim") {
            cfg.train.attn_dim = need_size(v, key);
        } else if (key == "embed_dim") {
            cfg.train.embed_dim = need_size(v, key);
        } else if (key == "min_count") {
            cfg.train.min_count = need_size(v, key);
        } else if (key == "class_weights") {
            cfg.train.class_weights = need_bool(v, key);
        } else if (key == "train_embeddings") {
            cfg.train.train_embeddings = need_bool(v, key);
        } else if (key == "max_turn_tokens") {
            cfg.train.limits.max_turn_tokens = need_size(v, key);
        } else if (key == "max_session_turns") {
            cfg.train.limits.max_session_turns = need_size(v, key);
        } else if (key == "svm_c") {
            cfg.train.svm_c = need_number(v, key);
        } else if (key == "svm_epochs") {
            cfg.train.svm_epochs = need_size(v, key);
        } else if (key == "corpus") {
            cfg.corpus_path = need_string(v, key);
        } else if (key == "embeddings") {
            cfg.embeddings_path = need_string(v, key);
        } else if (key == "lexica") {
            if (!v.is_array())
                throw ConfigError("config: field 'lexica' must be an array of paths");
            cfg.lexica_paths.clear();
            for (const auto& p : v) cfg.lexica_paths.push_back(need_string(p, key));
        } else if (key == "output_dir") {
            cfg.output_dir = need_string(v, key);
        } else if (key == "checkpoint") {
            cfg.checkpoint_path = need_string(v, key);
        } else if (key == "scale_lexica") {
            cfg.scale_lexica = need_bool(v, key);
        } else if (key == "phq8_threshold") {
            if (!v.is_number_integer())
                throw ConfigError("config: field 'phq8_threshold' must be an integer");
            cfg.phq8_threshold = v.get<int>();
        } else if (key == "categories") {
            cfg.categories = parse_categories(v);
        } else if (key == "samples") {
            cfg.gc_samples = need_size(v, key);
        } else if (key == "h") {
            cfg.gc_h = need_number(v, key);
        } else {
            throw ConfigError("config: unknown field '" + key + "'");
        }
    }
    cfg.echo = merged;
    return cfg;
}

void apply_env_seed(RunConfig& cfg) {
    const char* env = std::getenv("HAN_AFFECT_SEED");
    if (!env) return;
    try {
        std::size_t used = 0;
        unsigned long long v = std::stoull(env, &used);
        if (used != std::string(env).size()) throw std::invalid_argument("trailing");
        cfg.train.seed = v;
    } catch (...) {
        throw ConfigError(std::string("config: HAN_AFFECT_SEED must be a non-negative "
                                      "integer (got '") + env + "')");
    }
    cfg.echo["seed"] = cfg.train.seed;
}

void validate_train_config(const RunConfig& cfg) {
    try {
        cfg.train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (cfg.train.wants_conditioning() && cfg.lexica_paths.empty())
        throw ConfigError("config: model '" + cfg.train.model +
                          "' requires at least one entry in field 'lexica'");
}

std::optional<lex::LexiconStack> load_stack(const RunConfig& cfg) {
    if (cfg.lexica_paths.empty()) return std::nullopt;
    auto stack = lex::load_stack(cfg.lexica_paths, cfg.scale_lexica);
    return stack;
}

std::vector<corpus::Session> load_corpus(const RunConfig& cfg, bool require_labels) {
    if (cfg.corpus_path.empty())
        throw ConfigError("config: field 'corpus' is required for this command");
    corpus::ParseOptions opts;
    opts.require_labels = require_labels;
    opts.phq8_threshold = cfg.phq8_threshold;
    return corpus::load_sessions(cfg.corpus_path, opts);
}

std::string config_hash(const json& echo) {
    return training::hex64(training::fnv1a64(echo.dump()));
}

json report_head(const char* command, const RunConfig& cfg) {
    json j;
    j["command"] = command;
    j["config"] = cfg.echo;
    j["config_hash"] = config_hash(cfg.echo);
    j["seed"] = cfg.train.seed;
    return j;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path.string());
    out << text;
}

// Human table to stdout; JSON to output_dir when set, stdout otherwise.
void emit_report(const RunConfig& cfg, const std::string& stem,
                 const std::string& json_text, const std::string& table) {
    std::cout << table;
    if (!cfg.output_dir.empty()) {
        fs::create_directories(cfg.output_dir);
        fs::path path = fs::path(cfg.output_dir) / (stem + ".json");
        write_text_file(path, json_text + "\n");
        std::cout << "wrote " << path.string() << "\n";
    } else {
        std::cout << json_text << "\n";
    }
}

std::string metrics_table(const training::Metrics& m) {
    char buf[256];
    std::ostringstream out;
    out << "class           precision  recall  f1\n";
    const char* names[2] = {"not_depressed", "depressed"};
    for (int c = 0; c < 2; ++c) {
        std::snprintf(buf, sizeof buf, "%-15s %-10.4f %-7.4f %.4f\n", names[c],
                      m.precision[c], m.recall[c], m.f1[c]);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "macro_f1 %.4f   uar %.4f\n", m.macro_f1, m.uar);
    out << buf;
    std::snprintf(buf, sizeof buf,
                  "confusion [[%zu, %zu], [%zu, %zu]] (rows actual, cols predicted)\n",
                  m.confusion[0][0], m.confusion[0][1], m.confusion[1][0],
                  m.confusion[1][1]);
    out << buf;
    return out.str();
}

int cmd_synth(const std::string& spec_path, const std::string& output_dir,
              const std::optional<std::uint64_t>& seed_override,
              const std::optional<std::size_t>& sessions_override) {
    synth::SynthSpec spec;
    if (!spec_path.empty()) {
        try {
            spec = synth::spec_from_json(load_json_file(spec_path, "synth spec"));
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    }
    if (sessions_override) spec.sessions_per_class = *sessions_override;
    if (seed_override) spec.seed = *seed_override;
    if (const char* env = std::getenv("HAN_AFFECT_SEED")) {
        try {
            spec.seed = std::stoull(env);
        } catch (...) {
            throw ConfigError("config: HAN_AFFECT_SEED must be a non-negative integer");
        }
    }
    try {
        spec.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    auto result = synth::generate(spec);
    for (const auto& w : result.warnings) std::cout << "warning: " << w << "\n";

    fs::create_directories(fs::path(output_dir) / "lexica");
    fs::path corpus_path = fs::path(output_dir) / "corpus.jsonl";
    write_text_file(corpus_path, corpus::sessions_to_jsonl(result.sessions));
    std::vector<std::string> lexica_files;
    for (const auto& lx : result.lexica) {
        fs::path p = fs::path(output_dir) / "lexica" / (lx.name + ".tsv");
        write_text_file(p, synth::lexicon_tsv(lx));
        lexica_files.push_back(p.string());
    }
    fs::path spec_path_out = fs::path(output_dir) / "spec.json";
    write_text_file(spec_path_out, synth::spec_json(spec).dump(2) + "\n");

    std::cout << "generated " << result.sessions.size() << " sessions ("
              << spec.sessions_per_class << " per class) into " << corpus_path.string()
              << "\n";
    std::cout << "wrote " << lexica_files.size() << " toy lexica and "
              << spec_path_out.string() << "\n";
    return 0;
}

int cmd_analyze(const RunConfig& cfg) {
    if (cfg.lexica_paths.empty())
        throw ConfigError("config: field 'lexica' is required for analyze");
    auto sessions = load_corpus(cfg, true);
    auto stack = lex::load_stack(cfg.lexica_paths, cfg.scale_lexica);

    auto ts = analysis::turn_stats(sessions);
    auto cv = analysis::class_vocab_stats(sessions, stack, cfg.categories,
                                          cfg.train.view);
    auto co = analysis::category_occurrence(sessions, stack, cfg.categories,
                                            cfg.train.view);

    json report = report_head("analyze", cfg);
    report["turn_stats"] = {{"sessions", sessions.size()},
                            {"avg_turns_per_session", ts.avg_turns_per_session},
                            {"avg_tokens_per_turn", ts.avg_tokens_per_turn},
                            {"avg_tokens_client", ts.avg_tokens_client},
                            {"avg_tokens_therapist", ts.avg_tokens_therapist}};
    auto class_json = [](const analysis::ClassStats& c) {
        return json{{"sessions", c.samples},
                    {"turns", c.total_turns},
                    {"vocab", c.vocab_size},
                    {"affective_words", c.affective_word_count},
                    {"affective_fraction", c.affective_fraction}};
    };
    report["class_vocab"] = {{"depressed", class_json(cv.depressed)},
                             {"not_depressed", class_json(cv.not_depressed)}};
    json cats = json::array();
    for (std::size_t i = 0; i < co.labels.size(); ++i) {
        cats.push_back({{"label", co.labels[i]},
                        {"depressed",
                         {{"occurrences", co.depressed[i].occurrences},
                          {"fraction_of_tokens", co.depressed[i].fraction_of_tokens}}},
                        {"not_depressed",
                         {{"occurrences", co.not_depressed[i].occurrences},
                          {"fraction_of_tokens",
                           co.not_depressed[i].fraction_of_tokens}}}});
    }
    report["category_occurrence"] = cats;

    char buf[256];
    std::ostringstream table;
    std::snprintf(buf, sizeof buf,
                  "sessions %zu  avg turns/session %.2f  avg tokens/turn %.2f "
                  "(client %.2f, therapist %.2f)\n",
                  sessions.size(), ts.avg_turns_per_session, ts.avg_tokens_per_turn,
                  ts.avg_tokens_client, ts.avg_tokens_therapist);
    table << buf;
    table << "\nclass           sessions  turns   vocab   affective  fraction\n";
    auto class_row = [&](const char* name, const analysis::ClassStats& c) {
        std::snprintf(buf, sizeof buf, "%-15s %-9zu %-7zu %-7zu %-10zu %.4f\n", name,
                      c.samples, c.total_turns, c.vocab_size, c.affective_word_count,
                      c.affective_fraction);
        table << buf;
    };
    class_row("depressed", cv.depressed);
    class_row("not_depressed", cv.not_depressed);
    table << "\ncategory              depressed             not_depressed\n";
    for (std::size_t i = 0; i < co.labels.size(); ++i) {
        char dep[24];
        std::snprintf(dep, sizeof dep, "%.4f (%zu)", co.depressed[i].fraction_of_tokens,
                      co.depressed[i].occurrences);
        std::snprintf(buf, sizeof buf, "%-21s %-21s %.4f (%zu)\n", co.labels[i].c_str(),
                      dep, co.not_depressed[i].fraction_of_tokens,
                      co.not_depressed[i].occurrences);
        table << buf;
    }

    emit_report(cfg, "analyze_report", report.dump(), table.str());
    return 0;
}

int cmd_cv(const RunConfig& cfg) {
    validate_train_config(cfg);
    auto sessions = load_corpus(cfg, true);
    auto stack = load_stack(cfg);
    const lex::LexiconStack* sp = stack ? &*stack : nullptr;

    training::CvResult result;
    try {
        result = training::run_cv(sessions, cfg.train, sp, cfg.embeddings_path,
                                  cfg.echo);
    } catch (const std::exception& e) {
        std::string msg = e.what();
        if (msg.rfind("config:", 0) == 0) throw ConfigError(msg);
        throw;
    }
    emit_report(cfg, "cv_report", result.report_json, result.report_text);
    return 0;
}

int cmd_train(const RunConfig& cfg) {
    validate_train_config(cfg);
    auto sessions = load_corpus(cfg, true);
    auto stack = load_stack(cfg);
    const lex::LexiconStack* sp = stack ? &*stack : nullptr;
    auto viewed = corpus::select_view(sessions, cfg.train.view);

    if (cfg.train.wants_summary())
        for (const auto& s : viewed)
            if (!s.summary)
                throw ConfigError("config: model '" + cfg.train.model +
                                  "' needs summaries, session '" + s.id +
                                  "' has none");

    Rng master(cfg.train.seed);
    std::uint64_t plan_seed = master.next();
    std::uint64_t run_seed = master.next();
    auto plan = training::kfold_split(viewed, cfg.train.folds, plan_seed);
    std::vector<corpus::Session> train_sessions, val_sessions;
    for (auto i : plan.folds[0].train) train_sessions.push_back(viewed[i]);
    for (auto i : plan.folds[0].val) val_sessions.push_back(viewed[i]);

    json report = report_head("train", cfg);
    report["train_size"] = train_sessions.size();
    report["val_size"] = val_sessions.size();
    std::string table;

    if (cfg.train.is_svm()) {
        auto tfidf = baseline::TfIdfModel::fit(train_sessions);
        std::vector<baseline::SparseVec> feats;
        std::vector<corpus::Label> labels;
        for (const auto& s : train_sessions) {
            feats.push_back(tfidf.transform(s));
            labels.push_back(*s.label);
        }
        auto svm = baseline::LinearSvm::train(feats, labels, cfg.train.svm_c,
                                              cfg.train.svm_epochs, run_seed);
        std::vector<corpus::Label> preds, truth;
        for (const auto& s : val_sessions) {
            preds.push_back(svm.predict(tfidf.transform(s)));
            truth.push_back(*s.label);
        }
        auto metrics = training::evaluate(preds, truth);
        report["val_metrics"] = training::metrics_json(metrics);
        report["features"] = tfidf.feature_count();
        table = metrics_table(metrics);
    } else {
        Rng rng(run_seed);
        auto vocab = corpus::Vocabulary::build(train_sessions, cfg.train.min_count);
        corpus::EmbeddingTable emb =
            cfg.embeddings_path
                ? corpus::load_embeddings(*cfg.embeddings_path, vocab,
                                          cfg.train.embed_dim, rng)
                : corpus::random_embeddings(vocab, cfg.train.embed_dim, rng);
        emb.trainable = cfg.train.train_embeddings;
        report["embedding_coverage"] = emb.coverage;

        auto mcfg = training::han_config(cfg.train, sp);
        auto params = model::HanParams::init(mcfg, emb, rng);

        std::vector<corpus::IndexedSession> train_idx, val_idx;
        for (const auto& s : train_sessions)
            train_idx.push_back(corpus::index_session(s, vocab, cfg.train.limits));
        for (const auto& s : val_sessions)
            val_idx.push_back(corpus::index_session(s, vocab, cfg.train.limits));

        std::vector<double> wts = {1.0, 1.0};
        if (cfg.train.class_weights) {
            double counts[2] = {0, 0};
            for (const auto& s : train_idx)
                counts[static_cast<std::size_t>(*s.label)] += 1.0;
            for (int c = 0; c < 2; ++c)
                if (counts[c] > 0)
                    wts[c] = (counts[0] + counts[1]) / (2.0 * counts[c]);
        }
        const std::vector<double>* wptr = cfg.train.class_weights ? &wts : nullptr;

        auto tr = training::train_one(train_idx, val_idx, std::move(params), mcfg, sp,
                                      cfg.train, wptr, rng);

        auto preds = training::predict_all(val_idx, tr.best_params, mcfg, sp);
        std::vector<corpus::Label> truth;
        for (const auto& s : val_idx) truth.push_back(*s.label);
        auto metrics = training::evaluate(preds, truth);

        json hist = json::array();
        for (const auto& r : tr.history)
            hist.push_back({{"epoch", r.epoch},
                            {"train_loss", r.train_loss},
                            {"val_loss", r.val_loss}});
        report["history"] = hist;
        report["best_epoch"] = tr.best_epoch;
        report["best_val_loss"] = tr.best_val_loss;
        report["stopped_early"] = tr.stopped_early;
        report["val_metrics"] = training::metrics_json(metrics);

        std::string ckpt = cfg.checkpoint_path;
        if (ckpt.empty())
            ckpt = cfg.output_dir.empty()
                       ? "checkpoint.json"
                       : (fs::path(cfg.output_dir) / "checkpoint.json").string();
        if (!fs::path(ckpt).parent_path().empty())
            fs::create_directories(fs::path(ckpt).parent_path());
        model::save_checkpoint(ckpt, tr.best_params, mcfg, vocab);
        report["checkpoint"] = ckpt;

        char buf[128];
        std::ostringstream t;
        std::snprintf(buf, sizeof buf,
                      "trained %zu epochs, best epoch %zu (val loss %.4f)%s\n",
                      tr.history.size(), tr.best_epoch, tr.best_val_loss,
                      tr.stopped_early ? ", stopped early" : "");
        t << buf << metrics_table(metrics);
        t << "checkpoint " << ckpt << "\n";
        table = t.str();
    }

    emit_report(cfg, "train_report", report.dump(), table);
    return 0;
}

int cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint_path.empty())
        throw ConfigError("config: field 'checkpoint' is required for eval");
    auto ckpt = model::load_checkpoint(cfg.checkpoint_path);

    std::optional<lex::LexiconStack> stack = load_stack(cfg);
    const lex::LexiconStack* sp = stack ? &*stack : nullptr;
    if (ckpt.config.conditioning) {
        if (!sp)
            throw ConfigError("config: checkpoint conditions on lexica; field "
                              "'lexica' is required");
        if (sp->total_dim() != ckpt.config.context_dim)
            throw ConfigError("config: lexica stack width " +
                              std::to_string(sp->total_dim()) +
                              " does not match checkpoint context width " +
                              std::to_string(ckpt.config.context_dim));
    }

    auto sessions = load_corpus(cfg, true);
    auto viewed = corpus::select_view(sessions, cfg.train.view);
    if (ckpt.config.summary)
        for (const auto& s : viewed)
            if (!s.summary)
                throw ConfigError("config: checkpoint uses summaries, session '" +
                                  s.id + "' has none");

    std::vector<corpus::IndexedSession> indexed;
    std::vector<corpus::Label> truth;
    for (const auto& s : viewed) {
        indexed.push_back(corpus::index_session(s, ckpt.vocab, cfg.train.limits));
        truth.push_back(*s.label);
    }
    auto preds = training::predict_all(indexed, ckpt.params, ckpt.config, sp);
    auto metrics = training::evaluate(preds, truth);

    json report = report_head("eval", cfg);
    report["checkpoint"] = cfg.checkpoint_path;
    report["sessions"] = viewed.size();
    report["metrics"] = training::metrics_json(metrics);
    emit_report(cfg, "eval_report", report.dump(), metrics_table(metrics));
    return 0;
}

int cmd_gradcheck(RunConfig cfg) {
    // Default: the largest variant over the built-in toy corpus, sized so the
    // check runs in seconds.
    if (!cfg.echo.count("model")) cfg.train.model = "han_ls";
    if (!cfg.echo.count("hidden")) cfg.train.hidden = 8;
    if (!cfg.echo.count("attn_dim")) cfg.train.attn_dim = 8;
    if (!cfg.echo.count("embed_dim")) cfg.train.embed_dim = 8;
    if (!cfg.echo.count("dropout")) cfg.train.dropout = 0.0;
    if (!cfg.echo.count("train_embeddings")) cfg.train.train_embeddings = true;
    try {
        cfg.train.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }

    std::vector<corpus::Session> sessions;
    std::optional<lex::LexiconStack> stack;
    if (!cfg.corpus_path.empty()) sessions = load_corpus(cfg, true);
    else sessions = synth::toy_corpus();
    if (!cfg.lexica_paths.empty())
        stack = lex::load_stack(cfg.lexica_paths, cfg.scale_lexica);
    else if (cfg.train.wants_conditioning())
        stack = lex::LexiconStack(synth::toy_lexica());
    const lex::LexiconStack* sp = stack ? &*stack : nullptr;

    double err = training::gradcheck_full(sessions, cfg.train, sp, cfg.gc_samples,
                                          cfg.gc_h);
    bool pass = err < 1e-4;

    json report = report_head("gradcheck", cfg);
    report["samples"] = cfg.gc_samples;
    report["h"] = cfg.gc_h;
    report["max_rel_error"] = err;
    report["threshold"] = 1e-4;
    report["pass"] = pass;

    char buf[128];
    std::snprintf(buf, sizeof buf, "max relative error %.3e (threshold 1e-4): %s\n",
                  err, pass ? "pass" : "FAIL");
    emit_report(cfg, "gradcheck_report", report.dump(), buf);
    return pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical attention experiments on session transcripts"};
    app.require_subcommand(1);

    struct Flags {
        std::string config, corpus, embeddings, output_dir, checkpoint, model, view;
        std::string spec;
        std::vector<std::string> lexica;
        std::size_t folds = 0, max_epochs = 0, patience = 0, hidden = 0, attn_dim = 0,
                    embed_dim = 0, min_count = 0, svm_epochs = 0, max_turn_tokens = 0,
                    max_session_turns = 0, samples = 0, sessions_per_class = 0;
        double lr = 0, dropout = 0, svm_c = 0, h = 0;
        std::uint64_t seed = 0;
        bool class_weights = true, train_embeddings = false, scale_lexica = false;
        int phq8_threshold = 0;
    } f;

    std::vector<std::function<void(json&)>> appliers;
    auto opt = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                   auto& slot, const std::string& desc) {
        auto* o = cmd->add_option(flag, slot, desc);
        appliers.push_back([o, key, &slot](json& j) {
            if (o->count()) j[key] = slot;
        });
        return o;
    };
    auto flg = [&](CLI::App* cmd, const std::string& flag, const std::string& key,
                   bool& slot, const std::string& desc) {
        auto* o = cmd->add_flag(flag, slot, desc);
        appliers.push_back([o, key, &slot](json& j) {
            if (o->count()) j[key] = slot;
        });
        return o;
    };

    auto add_io = [&](CLI::App* cmd) {
        cmd->add_option("--config", f.config, "JSON config file; flags override it");
        opt(cmd, "--corpus", "corpus", f.corpus, "session JSONL file");
        opt(cmd, "--lexica", "lexica", f.lexica, "lexicon TSV files")
            ->delimiter(',');
        opt(cmd, "--output-dir", "output_dir", f.output_dir,
            "directory for JSON reports");
        flg(cmd, "--scale-lexica", "scale_lexica", f.scale_lexica,
            "min-max scale lexicon values to [-1, 1]");
        opt(cmd, "--view", "view", f.view, "speaker view: client|therapist|both");
        opt(cmd, "--phq8-threshold", "phq8_threshold", f.phq8_threshold,
            "questionnaire binarization threshold");
        opt(cmd, "--seed", "seed", f.seed, "rng seed (HAN_AFFECT_SEED overrides)");
    };
    auto add_model = [&](CLI::App* cmd) {
        opt(cmd, "--model", "model", f.model, "svm|han|han_l|han_s|han_ls");
        opt(cmd, "--embeddings", "embeddings", f.embeddings,
            "pretrained embedding text file");
        opt(cmd, "--max-epochs", "max_epochs", f.max_epochs, "epoch cap");
        opt(cmd, "--lr", "lr", f.lr, "adam learning rate");
        opt(cmd, "--dropout", "dropout", f.dropout, "dropout rate");
        opt(cmd, "--patience", "patience", f.patience,
            "early-stopping patience (epochs)");
        opt(cmd, "--hidden", "hidden", f.hidden, "gru hidden size per direction");
        opt(cmd, "--attn-dim", "attn_dim", f.attn_dim, "attention projection size");
        opt(cmd, "--embed-dim", "embed_dim", f.embed_dim, "word embedding size");
        opt(cmd, "--min-count", "min_count", f.min_count, "vocabulary frequency floor");
        flg(cmd, "--train-embeddings", "train_embeddings", f.train_embeddings,
            "update embeddings during training");
        auto* cw = cmd->add_flag("--class-weights,!--no-class-weights",
                                 f.class_weights, "inverse-frequency class weights");
        appliers.push_back([cw, &f](json& j) {
            if (cw->count()) j["class_weights"] = f.class_weights;
        });
        opt(cmd, "--max-turn-tokens", "max_turn_tokens", f.max_turn_tokens,
            "truncate turns to this many tokens");
        opt(cmd, "--max-session-turns", "max_session_turns", f.max_session_turns,
            "truncate sessions to this many turns");
        opt(cmd, "--svm-c", "svm_c", f.svm_c, "svm regularization constant");
        opt(cmd, "--svm-epochs", "svm_epochs", f.svm_epochs, "svm training epochs");
    };

    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic corpus");
    synth_cmd->add_option("--spec", f.spec, "synth spec JSON file");
    synth_cmd->add_option("--output-dir", f.output_dir, "where corpus files go");
    auto* synth_seed = synth_cmd->add_option("--seed", f.seed, "rng seed");
    auto* synth_n = synth_cmd->add_option("--sessions-per-class", f.sessions_per_class,
                                          "sessions per class");

    auto* analyze_cmd =
        app.add_subcommand("analyze", "corpus shape and affective-vocabulary tables");
    add_io(analyze_cmd);

    auto* train_cmd = app.add_subcommand("train", "train one model on a single split");
    add_io(train_cmd);
    add_model(train_cmd);
    opt(train_cmd, "--folds", "folds", f.folds,
        "holdout is one fold of this many (default 5)");
    opt(train_cmd, "--checkpoint", "checkpoint", f.checkpoint,
        "where to save the trained model");

    auto* cv_cmd = app.add_subcommand("cv", "stratified k-fold cross-validation");
    add_io(cv_cmd);
    add_model(cv_cmd);
    opt(cv_cmd, "--folds", "folds", f.folds, "number of folds");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a corpus");
    add_io(eval_cmd);
    opt(eval_cmd, "--checkpoint", "checkpoint", f.checkpoint, "checkpoint to load");
    opt(eval_cmd, "--max-turn-tokens", "max_turn_tokens", f.max_turn_tokens,
        "truncate turns to this many tokens");
    opt(eval_cmd, "--max-session-turns", "max_session_turns", f.max_session_turns,
        "truncate sessions to this many turns");

    auto* gc_cmd = app.add_subcommand(
        "gradcheck", "finite-difference check of the model gradients");
    add_io(gc_cmd);
    add_model(gc_cmd);
    opt(gc_cmd, "--samples", "samples", f.samples, "parameter coordinates to probe");
    opt(gc_cmd, "--step", "h", f.h, "finite-difference step");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            std::optional<std::uint64_t> seed;
            if (synth_seed->count()) seed = f.seed;
            std::optional<std::size_t> n;
            if (synth_n->count()) n = f.sessions_per_class;
            return cmd_synth(f.spec, f.output_dir.empty() ? "synth_out" : f.output_dir,
                             seed, n);
        }

        json merged = json::object();
        if (!f.config.empty()) {
            merged = load_json_file(f.config, "config file");
            if (!merged.is_object())
                throw ConfigError("config: config file must hold a JSON object");
        }
        for (auto& apply : appliers) apply(merged);
        RunConfig cfg = config_from_merged(merged);
        apply_env_seed(cfg);

        if (analyze_cmd->parsed()) return cmd_analyze(cfg);
        if (train_cmd->parsed()) return cmd_train(cfg);
        if (cv_cmd->parsed()) return cmd_cv(cfg);
        if (eval_cmd->parsed()) return cmd_eval(cfg);
        if (gc_cmd->parsed()) return cmd_gradcheck(cfg);
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
