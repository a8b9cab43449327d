#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "colarec/autodiff.hpp"
#include "colarec/checkpoint.hpp"
#include "colarec/rng.hpp"

namespace colarec {

struct ModelConfig {
    std::size_t vocab_size = 0;
    std::size_t dim = 32;  // m, shared by embeddings, hidden states and codebooks
    std::size_t heads = 4;
    std::size_t ff_dim = 64;
    std::size_t encoder_layers = 2;
    std::size_t decoder_layers = 2;
    std::size_t gid_length = 3;     // l
    std::size_t codebook_size = 32;  // K
    std::size_t max_len = 256;
    /// Multiplies every initial weight; small values give a near-linear model.
    double init_scale = 1.0;

    void validate() const;
};

/// Pre-norm Transformer encoder-decoder. The decoder reads [BOS, z^1..z^{t-1}]
/// and its t-th output row is d_t; token scores at step t are d_t E_t^T with
/// one K x m codebook per GID position.
template <class T>
class Seq2SeqModel {
public:
    Seq2SeqModel() = default;
    Seq2SeqModel(const ModelConfig& config, std::uint64_t seed);

    const ModelConfig& config() const { return config_; }

    std::vector<Parameter<T>*> parameters();
    std::vector<const Parameter<T>*> parameters() const;
    Parameter<T>& parameter(const std::string& name);
    const Parameter<T>& parameter(const std::string& name) const;

    struct Encoded {
        Var hidden;   // n x m final-layer states (after the final norm)
        Var pooled;   // 1 x m mean over non-pad rows: h(X)
        std::vector<std::uint8_t> keep;
    };

    /// Pad tokens (id 0) are masked from attention and pooling.
    Encoded encode(Graph<T>& g, std::span<const std::uint32_t> tokens);

    /// Decoder states for [BOS, prefix...]; row t is d_{t+1}.
    Var decode(Graph<T>& g, const Encoded& enc, std::span<const std::uint32_t> prefix);

    /// 1 x K scores of row `row` of `states` against codebook `position`.
    Var logits(Graph<T>& g, Var states, std::size_t row, std::size_t position);

    /// -sum_t log p(z^t | X, z^{<t}) under teacher forcing.
    Var sequence_nll(Graph<T>& g, const Encoded& enc, std::span<const std::uint32_t> gid);

    /// Cached encoder output for decoding without recomputing the encoder.
    struct EncoderState {
        Tensor<T> hidden;
        Tensor<T> pooled;
        std::vector<std::uint8_t> keep;
    };
    EncoderState encode_state(std::span<const std::uint32_t> tokens);

    /// log softmax(d_t E_t^T) for t = prefix.size() + 1.
    std::vector<T> step_log_probs(const EncoderState& state, std::span<const std::uint32_t> prefix);

    /// Parameters plus meta/* scalars describing the architecture.
    Checkpoint to_checkpoint() const;
    static Seq2SeqModel from_checkpoint(const Checkpoint& ckpt);
    static ModelConfig config_from_checkpoint(const Checkpoint& ckpt);

    std::vector<Tensor<T>> snapshot() const;
    void restore(const std::vector<Tensor<T>>& values);

private:
    struct Attention {
        std::size_t wq, wk, wv, wo;
    };
    struct FeedForward {
        std::size_t w1, b1, w2, b2;
    };
    struct EncoderLayer {
        std::size_t norm1, norm2;
        Attention self;
        FeedForward ff;
    };
    struct DecoderLayer {
        std::size_t norm1, norm2, norm3;
        Attention self;
        Attention cross;
        FeedForward ff;
    };

    std::size_t add_param(const std::string& name, std::size_t rows, std::size_t cols, double std,
                          Rng& rng);
    std::size_t add_constant_param(const std::string& name, std::size_t rows, std::size_t cols, T value);
    Attention add_attention(const std::string& prefix, Rng& rng);
    FeedForward add_ff(const std::string& prefix, Rng& rng);

    Var attend(Graph<T>& g, Var queries, Var keys, const Attention& a, SoftmaxMask mask);
    Var feed_forward(Graph<T>& g, Var x, const FeedForward& f);
    Var p(Graph<T>& g, std::size_t idx) { return g.param(params_[idx]); }

    ModelConfig config_;
    std::vector<Parameter<T>> params_;
    std::size_t token_embedding_ = 0, encoder_positions_ = 0, encoder_norm_ = 0;
    std::size_t decoder_embedding_ = 0, decoder_positions_ = 0, decoder_norm_ = 0;
    std::vector<EncoderLayer> encoder_;
    std::vector<DecoderLayer> decoder_;
    std::vector<std::size_t> codebooks_;
};

extern template class Seq2SeqModel<float>;
extern template class Seq2SeqModel<double>;

}  // namespace colarec
