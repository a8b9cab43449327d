#include "colarec/model.hpp"

#include <cmath>
#include <numeric>

#include "colarec/error.hpp"

namespace colarec {

void ModelConfig::validate() const {
    const auto fail = [](const std::string& what) { throw Error(ErrorKind::config, what); };
    if (vocab_size == 0) fail("model vocab_size must be > 0");
    if (dim == 0 || heads == 0 || dim % heads != 0) fail("model dim must be a positive multiple of heads");
    if (ff_dim == 0) fail("ff_dim must be > 0");
    if (gid_length == 0) fail("gid length l must be >= 1");
    if (codebook_size < 1) fail("codebook size K must be >= 1");
    if (max_len < 2) fail("max_len must be >= 2");
}

template <class T>
Seq2SeqModel<T>::Seq2SeqModel(const ModelConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(mix_seed(seed, 0x5E95E9));
    const std::size_t m = config_.dim;
    const double s = config_.init_scale;
    // reserve so that parameter addresses stay fixed
    params_.reserve(8 + 12 * config_.encoder_layers + 19 * config_.decoder_layers + config_.gid_length);
    token_embedding_ = add_param("embed.tokens", config_.vocab_size, m, 0.5 * s, rng);
    encoder_positions_ = add_param("embed.enc_pos", config_.max_len, m, 0.1 * s, rng);
    for (std::size_t layer = 0; layer < config_.encoder_layers; ++layer) {
        const std::string pre = "enc." + std::to_string(layer) + ".";
        EncoderLayer L;
        L.norm1 = add_constant_param(pre + "norm1", 1, m, T(1));
        L.self = add_attention(pre + "self", rng);
        L.norm2 = add_constant_param(pre + "norm2", 1, m, T(1));
        L.ff = add_ff(pre + "ff", rng);
        encoder_.push_back(L);
    }
    encoder_norm_ = add_constant_param("enc.norm", 1, m, T(1));

    decoder_embedding_ =
        add_param("embed.dec_tokens", 1 + config_.gid_length * config_.codebook_size, m, 0.5 * s, rng);
    decoder_positions_ = add_param("embed.dec_pos", config_.gid_length, m, 0.1 * s, rng);
    for (std::size_t layer = 0; layer < config_.decoder_layers; ++layer) {
        const std::string pre = "dec." + std::to_string(layer) + ".";
        DecoderLayer L;
        L.norm1 = add_constant_param(pre + "norm1", 1, m, T(1));
        L.self = add_attention(pre + "self", rng);
        L.norm2 = add_constant_param(pre + "norm2", 1, m, T(1));
        L.cross = add_attention(pre + "cross", rng);
        L.norm3 = add_constant_param(pre + "norm3", 1, m, T(1));
        L.ff = add_ff(pre + "ff", rng);
        decoder_.push_back(L);
    }
    decoder_norm_ = add_constant_param("dec.norm", 1, m, T(1));
    for (std::size_t t = 0; t < config_.gid_length; ++t) {
        codebooks_.push_back(add_param("codebook." + std::to_string(t), config_.codebook_size, m,
                                       s / std::sqrt(static_cast<double>(m)), rng));
    }
}

template <class T>
std::size_t Seq2SeqModel<T>::add_param(const std::string& name, std::size_t rows, std::size_t cols, double std,
                                       Rng& rng) {
    Tensor<T> value = Tensor<T>::matrix(rows, cols);
    for (auto& v : value.values()) v = static_cast<T>(std * rng.normal());
    params_.emplace_back(name, std::move(value));
    return params_.size() - 1;
}

template <class T>
std::size_t Seq2SeqModel<T>::add_constant_param(const std::string& name, std::size_t rows, std::size_t cols,
                                                T value) {
    params_.emplace_back(name, Tensor<T>::matrix(rows, cols, value));
    return params_.size() - 1;
}

template <class T>
typename Seq2SeqModel<T>::Attention Seq2SeqModel<T>::add_attention(const std::string& prefix, Rng& rng) {
    const std::size_t m = config_.dim;
    const double std = config_.init_scale / std::sqrt(static_cast<double>(m));
    Attention a;
    a.wq = add_param(prefix + ".wq", m, m, std, rng);
    a.wk = add_param(prefix + ".wk", m, m, std, rng);
    a.wv = add_param(prefix + ".wv", m, m, std, rng);
    a.wo = add_param(prefix + ".wo", m, m, std, rng);
    return a;
}

template <class T>
typename Seq2SeqModel<T>::FeedForward Seq2SeqModel<T>::add_ff(const std::string& prefix, Rng& rng) {
    const std::size_t m = config_.dim;
    const std::size_t f = config_.ff_dim;
    FeedForward ff;
    ff.w1 = add_param(prefix + ".w1", m, f, config_.init_scale / std::sqrt(static_cast<double>(m)), rng);
    ff.b1 = add_constant_param(prefix + ".b1", 1, f, T(0));
    ff.w2 = add_param(prefix + ".w2", f, m, config_.init_scale / std::sqrt(static_cast<double>(f)), rng);
    ff.b2 = add_constant_param(prefix + ".b2", 1, m, T(0));
    return ff;
}

template <class T>
std::vector<Parameter<T>*> Seq2SeqModel<T>::parameters() {
    std::vector<Parameter<T>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
}

template <class T>
std::vector<const Parameter<T>*> Seq2SeqModel<T>::parameters() const {
    std::vector<const Parameter<T>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
}

template <class T>
Parameter<T>& Seq2SeqModel<T>::parameter(const std::string& name) {
    for (auto& p : params_) {
        if (p.name == name) return p;
    }
    throw Error(ErrorKind::invalid_argument, "no parameter named '" + name + "'");
}

template <class T>
const Parameter<T>& Seq2SeqModel<T>::parameter(const std::string& name) const {
    return const_cast<Seq2SeqModel*>(this)->parameter(name);
}

template <class T>
Var Seq2SeqModel<T>::attend(Graph<T>& g, Var queries, Var keys, const Attention& a, SoftmaxMask mask) {
    const std::size_t heads = config_.heads;
    const std::size_t dh = config_.dim / heads;
    const T scale = T(1) / std::sqrt(static_cast<T>(dh));
    const Var q = g.matmul(queries, p(g, a.wq));
    const Var k = g.matmul(keys, p(g, a.wk));
    const Var v = g.matmul(keys, p(g, a.wv));
    std::vector<Var> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        const Var qh = heads == 1 ? q : g.slice_cols(q, h * dh, dh);
        const Var kh = heads == 1 ? k : g.slice_cols(k, h * dh, dh);
        const Var vh = heads == 1 ? v : g.slice_cols(v, h * dh, dh);
        const Var weights = g.softmax_rows(g.scale(g.matmul_nt(qh, kh), scale), mask);
        outs.push_back(g.matmul(weights, vh));
    }
    const Var merged = heads == 1 ? outs[0] : g.concat_cols(outs);
    return g.matmul(merged, p(g, a.wo));
}

template <class T>
Var Seq2SeqModel<T>::feed_forward(Graph<T>& g, Var x, const FeedForward& f) {
    const Var hidden = g.gelu(g.add_row(g.matmul(x, p(g, f.w1)), p(g, f.b1)));
    return g.add_row(g.matmul(hidden, p(g, f.w2)), p(g, f.b2));
}

template <class T>
typename Seq2SeqModel<T>::Encoded Seq2SeqModel<T>::encode(Graph<T>& g, std::span<const std::uint32_t> tokens) {
    if (tokens.empty()) throw Error(ErrorKind::invalid_argument, "encoder input is empty");
    if (tokens.size() > config_.max_len) {
        throw Error(ErrorKind::invalid_argument, "encoder input of length " + std::to_string(tokens.size()) +
                                                     " exceeds max_len " + std::to_string(config_.max_len));
    }
    Encoded enc;
    enc.keep.resize(tokens.size());
    bool any = false;
    for (std::size_t k = 0; k < tokens.size(); ++k) {
        if (tokens[k] >= config_.vocab_size) {
            throw Error(ErrorKind::invalid_argument, "token id " + std::to_string(tokens[k]) + " outside vocabulary");
        }
        enc.keep[k] = tokens[k] != 0;
        any = any || enc.keep[k];
    }
    if (!any) throw Error(ErrorKind::invalid_argument, "encoder input has only padding");
    std::vector<std::uint32_t> positions(tokens.size());
    std::iota(positions.begin(), positions.end(), 0U);
    Var x = g.add(g.row_select(p(g, token_embedding_), tokens), g.row_select(p(g, encoder_positions_), positions));
    const SoftmaxMask mask{false, enc.keep};
    for (const auto& L : encoder_) {
        const Var n1 = g.rms_norm(x, p(g, L.norm1));
        x = g.add(x, attend(g, n1, n1, L.self, mask));
        x = g.add(x, feed_forward(g, g.rms_norm(x, p(g, L.norm2)), L.ff));
    }
    enc.hidden = g.rms_norm(x, p(g, encoder_norm_));
    enc.pooled = g.mean_rows(enc.hidden, enc.keep);
    return enc;
}

template <class T>
Var Seq2SeqModel<T>::decode(Graph<T>& g, const Encoded& enc, std::span<const std::uint32_t> prefix) {
    const std::size_t l = config_.gid_length;
    const std::size_t k = config_.codebook_size;
    if (prefix.size() + 1 > l) {
        throw Error(ErrorKind::invalid_argument, "decoder prefix of length " + std::to_string(prefix.size()) +
                                                     " exceeds l-1 = " + std::to_string(l - 1));
    }
    std::vector<std::uint32_t> rows{0};
    for (std::size_t t = 0; t < prefix.size(); ++t) {
        if (prefix[t] >= k) throw Error(ErrorKind::invalid_argument, "GID token outside [0, K)");
        rows.push_back(static_cast<std::uint32_t>(1 + t * k + prefix[t]));
    }
    std::vector<std::uint32_t> positions(rows.size());
    std::iota(positions.begin(), positions.end(), 0U);
    Var y = g.add(g.row_select(p(g, decoder_embedding_), rows), g.row_select(p(g, decoder_positions_), positions));
    const SoftmaxMask causal{true, {}};
    const SoftmaxMask cross{false, enc.keep};
    for (const auto& L : decoder_) {
        const Var n1 = g.rms_norm(y, p(g, L.norm1));
        y = g.add(y, attend(g, n1, n1, L.self, causal));
        y = g.add(y, attend(g, g.rms_norm(y, p(g, L.norm2)), enc.hidden, L.cross, cross));
        y = g.add(y, feed_forward(g, g.rms_norm(y, p(g, L.norm3)), L.ff));
    }
    return g.rms_norm(y, p(g, decoder_norm_));
}

template <class T>
Var Seq2SeqModel<T>::logits(Graph<T>& g, Var states, std::size_t row, std::size_t position) {
    if (position >= config_.gid_length) throw Error(ErrorKind::invalid_argument, "codebook position out of range");
    const Var d = g.value(states).rows() == 1 ? states : g.slice_rows(states, row, 1);
    return g.matmul_nt(d, p(g, codebooks_[position]));
}

template <class T>
Var Seq2SeqModel<T>::sequence_nll(Graph<T>& g, const Encoded& enc, std::span<const std::uint32_t> gid) {
    const std::size_t l = config_.gid_length;
    if (gid.size() != l) throw Error(ErrorKind::invalid_argument, "GID length does not match the model");
    const Var states = decode(g, enc, gid.first(l - 1));
    std::vector<Var> picks;
    for (std::size_t t = 0; t < l; ++t) {
        const Var lp = g.log_softmax_rows(logits(g, states, t, t));
        picks.push_back(g.pick(lp, 0, gid[t]));
    }
    const Var total = picks.size() == 1 ? picks[0] : g.sum(g.concat_cols(picks));
    return g.scale(total, T(-1));
}

template <class T>
typename Seq2SeqModel<T>::EncoderState Seq2SeqModel<T>::encode_state(std::span<const std::uint32_t> tokens) {
    Graph<T> g;
    const Encoded enc = encode(g, tokens);
    return {g.value(enc.hidden), g.value(enc.pooled), enc.keep};
}

template <class T>
std::vector<T> Seq2SeqModel<T>::step_log_probs(const EncoderState& state, std::span<const std::uint32_t> prefix) {
    Graph<T> g;
    Encoded enc;
    enc.hidden = g.constant(state.hidden);
    enc.keep = state.keep;
    const Var states = decode(g, enc, prefix);
    const Var lp = g.log_softmax_rows(logits(g, states, prefix.size(), prefix.size()));
    const auto values = g.value(lp).values();
    return {values.begin(), values.end()};
}

template <class T>
Checkpoint Seq2SeqModel<T>::to_checkpoint() const {
    Checkpoint ckpt;
    const auto meta = [&](const char* name, std::size_t v) {
        ckpt.add(NamedTensor::scalar(std::string("meta/") + name, static_cast<double>(v)));
    };
    meta("vocab_size", config_.vocab_size);
    meta("dim", config_.dim);
    meta("heads", config_.heads);
    meta("ff_dim", config_.ff_dim);
    meta("encoder_layers", config_.encoder_layers);
    meta("decoder_layers", config_.decoder_layers);
    meta("gid_length", config_.gid_length);
    meta("codebook_size", config_.codebook_size);
    meta("max_len", config_.max_len);
    for (const auto& prm : params_) ckpt.add(NamedTensor::from(prm.name, prm.value));
    return ckpt;
}

template <class T>
ModelConfig Seq2SeqModel<T>::config_from_checkpoint(const Checkpoint& ckpt) {
    const auto get = [&](const char* name) {
        return static_cast<std::size_t>(ckpt.scalar(std::string("meta/") + name));
    };
    ModelConfig c;
    c.vocab_size = get("vocab_size");
    c.dim = get("dim");
    c.heads = get("heads");
    c.ff_dim = get("ff_dim");
    c.encoder_layers = get("encoder_layers");
    c.decoder_layers = get("decoder_layers");
    c.gid_length = get("gid_length");
    c.codebook_size = get("codebook_size");
    c.max_len = get("max_len");
    return c;
}

template <class T>
Seq2SeqModel<T> Seq2SeqModel<T>::from_checkpoint(const Checkpoint& ckpt) {
    Seq2SeqModel model(config_from_checkpoint(ckpt), 0);
    for (auto& prm : model.params_) {
        const NamedTensor& rec = ckpt.at(prm.name);
        Tensor<T> value = rec.to_tensor<T>();
        if (value.shape() != prm.value.shape()) {
            throw Error(ErrorKind::format, "checkpoint tensor '" + prm.name + "' has shape " +
                                               shape_string(value.shape()) + ", expected " +
                                               shape_string(prm.value.shape()));
        }
        prm.value = std::move(value);
    }
    return model;
}

template <class T>
std::vector<Tensor<T>> Seq2SeqModel<T>::snapshot() const {
    std::vector<Tensor<T>> out;
    for (const auto& prm : params_) out.push_back(prm.value);
    return out;
}

template <class T>
void Seq2SeqModel<T>::restore(const std::vector<Tensor<T>>& values) {
    if (values.size() != params_.size()) throw Error(ErrorKind::invalid_argument, "snapshot size mismatch");
    for (std::size_t k = 0; k < values.size(); ++k) params_[k].value = values[k];
}

template class Seq2SeqModel<float>;
template class Seq2SeqModel<double>;

}  // namespace colarec
