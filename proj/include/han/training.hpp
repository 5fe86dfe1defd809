#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "han/corpus.hpp"
#include "han/lexicon.hpp"
#include "han/model.hpp"

namespace han::training {

// Binary classification metrics; class order is [NotDepressed, Depressed].
struct Metrics {
    std::size_t confusion[2][2] = {{0, 0}, {0, 0}};  // [actual][predicted]
    double precision[2] = {0, 0};
    double recall[2] = {0, 0};
    double f1[2] = {0, 0};
    double macro_f1 = 0.0;  // mean of per-class F1, undefined class F1 = 0
    double uar = 0.0;       // mean of per-class recall
};

Metrics evaluate(const std::vector<corpus::Label>& preds,
                 const std::vector<corpus::Label>& labels);

nlohmann::json metrics_json(const Metrics& m);

// Stratified k-fold partition over session indices.
struct FoldPlan {
    struct Fold {
        std::vector<std::size_t> train;
        std::vector<std::size_t> val;
    };
    std::vector<Fold> folds;
};

FoldPlan kfold_split(const std::vector<corpus::Session>& sessions, std::size_t k,
                     std::uint64_t seed);

struct TrainConfig {
    std::string model = "han";  // han | han_l | han_s | han_ls | svm
    corpus::View view = corpus::View::Client;
    std::size_t folds = 5;
    std::size_t max_epochs = 40;
    double lr = 1e-3;
    double dropout = 0.2;
    std::size_t patience = 5;
    std::uint64_t seed = 1;
    std::size_t hidden = 300;
    std::size_t attn_dim = 300;
    std::size_t embed_dim = 300;
    std::size_t min_count = 1;
    bool class_weights = true;  // inverse class frequency
    bool train_embeddings = false;
    corpus::IndexLimits limits;
    double svm_c = 1.0;
    std::size_t svm_epochs = 20;

    bool is_svm() const { return model == "svm"; }
    bool wants_conditioning() const { return model == "han_l" || model == "han_ls"; }
    bool wants_summary() const { return model == "han_s" || model == "han_ls"; }
    void validate() const;
};

nlohmann::json train_config_json(const TrainConfig& cfg);

// Model-size fields of the network derived from the run configuration;
// context width comes from the stack when the variant conditions on it.
model::HanConfig han_config(const TrainConfig& cfg, const lex::LexiconStack* stack);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    model::HanParams best_params;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    std::vector<EpochRecord> history;
    bool stopped_early = false;
};

// Epoch loop with per-sample Adam updates; returns the parameters of the
// epoch with the lowest validation loss, stopping after `patience`
// non-improving epochs.
TrainResult train_one(const std::vector<corpus::IndexedSession>& train_set,
                      const std::vector<corpus::IndexedSession>& val_set,
                      model::HanParams params, const model::HanConfig& mcfg,
                      const lex::LexiconStack* stack, const TrainConfig& cfg,
                      const std::vector<double>* class_wts, Rng& rng);

double mean_loss(const std::vector<corpus::IndexedSession>& set,
                 const model::HanParams& params, const model::HanConfig& mcfg,
                 const lex::LexiconStack* stack, const std::vector<double>* class_wts);

std::vector<corpus::Label> predict_all(const std::vector<corpus::IndexedSession>& set,
                                       const model::HanParams& params,
                                       const model::HanConfig& mcfg,
                                       const lex::LexiconStack* stack);

struct FoldOutcome {
    std::size_t fold = 0;  // 1-based
    Metrics metrics;
    std::size_t best_epoch = 0;     // 0 for the svm baseline
    double best_val_loss = 0.0;
    std::size_t train_size = 0;
    std::size_t val_size = 0;
};

struct CvResult {
    std::vector<FoldOutcome> folds;
    double macro_f1_mean = 0.0, macro_f1_std = 0.0;
    double uar_mean = 0.0, uar_std = 0.0;
    std::string report_json;  // canonical; byte-stable for fixed config+seed
    std::string report_text;  // aligned table; includes wall-clock
    double wall_seconds = 0.0;
};

// Cross-validation per the run configuration. Per fold: vocabulary,
// embeddings and tf-idf statistics come from the training split only.
// `config_extras` is merged into the report's config echo (e.g. file paths).
CvResult run_cv(const std::vector<corpus::Session>& sessions, const TrainConfig& cfg,
                const lex::LexiconStack* stack,
                const std::optional<std::string>& embeddings_path,
                const nlohmann::json& config_extras = nlohmann::json::object());

// Finite-difference verification of the full model loss (all variants share
// this path; the toy corpus drives every parameter group). Returns the worst
// relative error over `samples` sampled coordinates.
double gradcheck_full(const std::vector<corpus::Session>& sessions,
                      const TrainConfig& cfg, const lex::LexiconStack* stack,
                      std::size_t samples, double h = 1e-5);

std::uint64_t fnv1a64(const std::string& s);
std::string hex64(std::uint64_t v);

}  // namespace han::training
