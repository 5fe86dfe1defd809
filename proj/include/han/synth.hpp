#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "han/corpus.hpp"
#include "han/lexicon.hpp"

namespace han::synth {

struct RatePair {
    double depressed = 0.0;
    double not_depressed = 0.0;
};

// Knobs for the synthetic corpus. The default rates exaggerate the observed
// direction of class contrasts (x5 on negative sentiment, anxiety and
// sadness) so a small model can separate the classes reliably.
struct SynthSpec {
    std::size_t sessions_per_class = 200;
    std::size_t min_turns = 4, max_turns = 8;     // turns per session
    std::size_t min_tokens = 6, max_tokens = 12;  // tokens per turn
    std::size_t base_vocab = 120;                 // neutral filler words
    std::map<std::string, RatePair> rates;        // category -> per-class rate
    std::uint64_t seed = 1;
    bool warn_if_identical = true;

    SynthSpec();
    void validate() const;
    bool classes_identical() const;
};

struct SynthResult {
    std::vector<corpus::Session> sessions;
    std::vector<lex::Lexicon> lexica;
    std::vector<std::string> warnings;
};

// Deterministic for a fixed seed; each session draws from its own derived
// stream, so generation order cannot change the corpus. Client turns emit
// category tokens at the class rate; therapist turns are class-neutral.
SynthResult generate(const SynthSpec& spec);

// The six toy lexica (dims 1, 1, 1, 4, 19, 73) covering the generator's
// affective token pools.
std::vector<lex::Lexicon> toy_lexica();

// Category -> affective token pool used by the generator.
const std::map<std::string, std::vector<std::string>>& affective_pools();

// Three tiny fixed sessions (two depressed, one control), summaries
// included; exercises every parameter group of the largest model variant.
std::vector<corpus::Session> toy_corpus();

std::string lexicon_tsv(const lex::Lexicon& lx);

nlohmann::json spec_json(const SynthSpec& spec);
SynthSpec spec_from_json(const nlohmann::json& j);

}  // namespace han::synth
