#pragma once

#include <cstdint>
#include <vector>

#include "colarec/model.hpp"
#include "colarec/rng.hpp"
#include "colarec/training.hpp"

namespace fixture {

/// dim-8, one encoder and one decoder layer, l=2, K=3.
inline colarec::ModelConfig tiny_config(std::size_t vocab = 24) {
    colarec::ModelConfig c;
    c.vocab_size = vocab;
    c.dim = 8;
    c.heads = 2;
    c.ff_dim = 16;
    c.encoder_layers = 1;
    c.decoder_layers = 1;
    c.gid_length = 2;
    c.codebook_size = 3;
    c.max_len = 16;
    return c;
}

inline colarec::TokenSeq random_tokens(colarec::Rng& rng, std::size_t vocab, std::size_t lo, std::size_t hi) {
    colarec::TokenSeq out(lo + rng.uniform_index(hi - lo + 1));
    for (auto& t : out) t = static_cast<std::uint32_t>(1 + rng.uniform_index(vocab - 1));
    return out;
}

/// Examples with every sequence filled so all four terms are active.
inline std::vector<colarec::TrainingExample> random_batch(colarec::Rng& rng, std::size_t n, std::size_t vocab,
                                                          std::size_t length, std::size_t k) {
    std::vector<colarec::TrainingExample> batch(n);
    for (auto& ex : batch) {
        ex.gid.resize(length);
        for (auto& z : ex.gid) z = static_cast<std::uint32_t>(rng.uniform_index(k));
        ex.user_input = random_tokens(rng, vocab, 2, 6);
        ex.item_input = random_tokens(rng, vocab, 2, 5);
        ex.negative_input = random_tokens(rng, vocab, 2, 5);
        ex.has_contrastive = true;
        ex.positive_input = random_tokens(rng, vocab, 2, 5);
        ex.contrastive_negative_input = random_tokens(rng, vocab, 2, 5);
    }
    return batch;
}

template <class T>
double loss_value(colarec::Seq2SeqModel<T>& model, const std::vector<colarec::TrainingExample>& batch,
                  const colarec::LossSettings& settings) {
    colarec::Graph<T> g;
    const auto loss = colarec::joint_loss(model, g, batch, settings);
    return static_cast<double>(g.value(loss.total)[0]);
}

/// Zeroes gradients, runs forward and backward, returns the loss.
template <class T>
double loss_and_grad(colarec::Seq2SeqModel<T>& model, const std::vector<colarec::TrainingExample>& batch,
                     const colarec::LossSettings& settings) {
    for (auto* p : model.parameters()) p->zero_grad();
    colarec::Graph<T> g;
    const auto loss = colarec::joint_loss(model, g, batch, settings);
    g.backward(loss.total);
    return static_cast<double>(g.value(loss.total)[0]);
}

}  // namespace fixture
