#pragma once

#include <span>
#include <vector>

#include "spamwall/bayes.hpp"
#include "spamwall/pipeline.hpp"

namespace spamwall {

enum class ExecMode { Serial, Parallel };

/// Runs the pipeline over a whole corpus and returns verdicts in input order.
/// Callers pass messages sorted by received_at (load_corpus_dir already does).
///
/// The serial path is the reference implementation: one message at a time, in
/// order. The parallel path partitions messages by greylist key (the only
/// state shared between messages) and processes each partition in input
/// order, so its verdicts are exactly equal to the serial ones.
std::vector<Verdict> filter_corpus(std::span<const Message> messages, const PipelineContext& ctx,
                                   ExecMode mode = ExecMode::Parallel);

std::vector<Verdict> filter_corpus_serial(std::span<const Message> messages,
                                          const PipelineContext& ctx);
std::vector<Verdict> filter_corpus_parallel(std::span<const Message> messages,
                                            const PipelineContext& ctx);

/// Dictionary building over a labelled corpus; the parallel path merges
/// per-thread partial dictionaries (counts are additive, so the result is
/// identical to the serial reference).
BayesDictionary train_corpus(std::span<const std::pair<Message, MailLabel>> corpus,
                             ExecMode mode = ExecMode::Parallel);

/// Batch classification keeps just the verdict and combined probability; the
/// per-token breakdown stays a single-message (classify) concern.
struct BatchScore {
    bool is_spam = false;
    double probability = 0.5;

    bool operator==(const BatchScore&) const = default;
};

std::vector<BatchScore> classify_corpus(std::span<const Message> messages,
                                        const BayesDictionary& dict, double threshold = 0.9,
                                        ExecMode mode = ExecMode::Parallel);

/// 0 when OpenMP is unavailable at build time.
int parallel_thread_count();

}  // namespace spamwall
