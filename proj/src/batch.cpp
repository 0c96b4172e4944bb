#include "spamwall/batch.hpp"

#include <map>
#include <tuple>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace spamwall {

int parallel_thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 0;
#endif
}

std::vector<Verdict> filter_corpus_serial(std::span<const Message> messages,
                                          const PipelineContext& ctx) {
    std::vector<Verdict> verdicts(messages.size());
    for (size_t i = 0; i < messages.size(); ++i) verdicts[i] = run_pipeline(messages[i], ctx);
    return verdicts;
}

std::vector<Verdict> filter_corpus_parallel(std::span<const Message> messages,
                                            const PipelineContext& ctx) {
    std::vector<Verdict> verdicts(messages.size());

    // Partition by the greylist triplet; every other stage is pure per message.
    using Key = std::tuple<std::string, std::string, std::string>;
    std::map<Key, std::vector<size_t>> partitions;
    for (size_t i = 0; i < messages.size(); ++i) {
        const Envelope& env = messages[i].envelope;
        partitions[{env.client_ip.to_string(), env.mail_from.key(),
                    env.rcpt_to.front().key()}]
            .push_back(i);
    }
    std::vector<const std::vector<size_t>*> work;
    work.reserve(partitions.size());
    for (const auto& [key, indices] : partitions) work.push_back(&indices);

#pragma omp parallel for schedule(dynamic, 8)
    for (size_t p = 0; p < work.size(); ++p) {
        for (size_t idx : *work[p]) verdicts[idx] = run_pipeline(messages[idx], ctx);
    }
    return verdicts;
}

std::vector<Verdict> filter_corpus(std::span<const Message> messages, const PipelineContext& ctx,
                                   ExecMode mode) {
    return mode == ExecMode::Serial ? filter_corpus_serial(messages, ctx)
                                    : filter_corpus_parallel(messages, ctx);
}

namespace {

void merge_counts(std::map<std::string, uint64_t>& into,
                  const std::map<std::string, uint64_t>& from) {
    for (const auto& [token, count] : from) into[token] += count;
}

}  // namespace

BayesDictionary train_corpus(std::span<const std::pair<Message, MailLabel>> corpus,
                             ExecMode mode) {
    if (mode == ExecMode::Serial) return train(corpus);

    BayesDictionary dict;
#pragma omp parallel
    {
        BayesDictionary local;
#pragma omp for schedule(static) nowait
        for (size_t i = 0; i < corpus.size(); ++i) {
            const auto& [msg, label] = corpus[i];
            auto& counts = label == MailLabel::Spam ? local.spam_counts : local.ham_counts;
            for (const auto& token : message_tokens(msg)) counts[token] += 1;
            if (label == MailLabel::Spam)
                local.spam_msgs += 1;
            else
                local.ham_msgs += 1;
        }
#pragma omp critical(spamwall_train_merge)
        {
            merge_counts(dict.spam_counts, local.spam_counts);
            merge_counts(dict.ham_counts, local.ham_counts);
            dict.spam_msgs += local.spam_msgs;
            dict.ham_msgs += local.ham_msgs;
        }
    }
    return dict;
}

std::vector<BatchScore> classify_corpus(std::span<const Message> messages,
                                        const BayesDictionary& dict, double threshold,
                                        ExecMode mode) {
    std::vector<BatchScore> out(messages.size());
    auto one = [&](size_t i) {
        auto result = classify(messages[i], dict, threshold);
        out[i] = BatchScore{result.is_spam, result.score.probability};
    };
    if (mode == ExecMode::Serial) {
        for (size_t i = 0; i < messages.size(); ++i) one(i);
        return out;
    }
#pragma omp parallel for schedule(static)
    for (size_t i = 0; i < messages.size(); ++i) one(i);
    return out;
}

}  // namespace spamwall
