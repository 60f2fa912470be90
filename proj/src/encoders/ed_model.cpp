#include "sembprobe/ed_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sembprobe/error.hpp"

namespace sembprobe {

EdModel::EdModel(std::size_t vocab_size, std::size_t dim)
    : embedding("ed.embedding", vocab_size + kReserved, dim), encoder("ed.encoder", dim, dim),
      decoder("ed.decoder", dim, dim), projection("ed.projection", dim, vocab_size + kReserved) {
    if (vocab_size == 0 || dim == 0) {
        throw ConfigError("encoder-decoder needs a nonempty vocabulary and k >= 1");
    }
}

void EdModel::init_uniform(Rng& rng, double range) {
    for (nn::Parameter* p : params()) {
        p->init_uniform(rng, range);
    }
}

nn::ParamRefs EdModel::params() {
    nn::ParamRefs out{&embedding.vectors};
    for (auto* p : encoder.params()) {
        out.push_back(p);
    }
    for (auto* p : decoder.params()) {
        out.push_back(p);
    }
    out.push_back(&projection.weight);
    out.push_back(&projection.bias);
    return out;
}

Checkpoint EdModel::to_checkpoint() const {
    Checkpoint ck;
    for (const nn::Parameter* p : const_cast<EdModel*>(this)->params()) {
        ck.put(p->name, p->value);
    }
    return ck;
}

EdModel EdModel::from_checkpoint(const Checkpoint& ck) {
    const Tensor& emb = ck.get("ed.embedding");
    if (emb.rank() != 2 || emb.rows() <= kReserved) {
        throw ParseError("encoder-decoder checkpoint has a malformed embedding table");
    }
    EdModel m(emb.rows() - kReserved, emb.cols());
    for (nn::Parameter* p : m.params()) {
        const Tensor& t = ck.get(p->name);
        if (t.shape() != p->value.shape()) {
            throw ParseError("checkpoint tensor " + p->name + " has shape " +
                             shape_string(t.shape()) + ", expected " +
                             shape_string(p->value.shape()));
        }
        p->value = t;
    }
    return m;
}

namespace {

void check_tokens(const EdModel& model, std::span<const TokenId> tokens) {
    if (tokens.empty()) {
        throw ConfigError("cannot encode an empty sentence");
    }
    for (TokenId t : tokens) {
        if (t >= model.vocab_size()) {
            throw RangeError("token id " + std::to_string(t) +
                             " outside encoder-decoder vocabulary of " +
                             std::to_string(model.vocab_size()));
        }
    }
}

template <class Order>
EncoderState run_encoder(const EdModel& model, std::span<const TokenId> tokens, Order order) {
    check_tokens(model, tokens);
    const std::size_t k = model.dim();
    EncoderState st{Vec(k, 0.0), Vec(k, 0.0)};
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const TokenId t = tokens[order(i, tokens.size())];
        auto step = nn::lstm_step(model.encoder, model.embedding.row(EdModel::symbol(t)), st.h,
                                  st.c);
        st.h = std::move(step.h);
        st.c = std::move(step.c);
    }
    return st;
}

} // namespace

EncoderState ed_encode_state(const EdModel& model, std::span<const TokenId> tokens) {
    return run_encoder(model, tokens, [](std::size_t i, std::size_t n) { return n - 1 - i; });
}

EncoderState ed_encode_state_in_order(const EdModel& model, std::span<const TokenId> tokens) {
    return run_encoder(model, tokens, [](std::size_t i, std::size_t) { return i; });
}

Vec ed_encode(const EdModel& model, const Sentence& sentence) {
    return ed_encode_state(model, sentence.tokens).h;
}

std::vector<TokenId> ed_decode_greedy(const EdModel& model, const EncoderState& state,
                                      std::size_t max_len) {
    const std::size_t k = model.dim();
    if (state.h.size() != k || state.c.size() != k) {
        throw DimensionError("decoder state must have dimension " + std::to_string(k));
    }
    std::vector<TokenId> out;
    Vec h = state.h;
    Vec c = state.c;
    TokenId prev = EdModel::kBos;
    while (out.size() < max_len) {
        auto step = nn::lstm_step(model.decoder, model.embedding.row(prev), h, c);
        h = std::move(step.h);
        c = std::move(step.c);
        const Vec logits = model.projection.apply(h);
        // BOS is never a target; skip it. max_element keeps the first maximum.
        const auto best = static_cast<TokenId>(
            std::max_element(logits.begin() + 1, logits.end()) - logits.begin());
        if (best == EdModel::kEos) {
            break;
        }
        out.push_back(best - EdModel::kReserved);
        prev = best;
    }
    return out;
}

std::vector<TokenId> ed_reconstruct(const EdModel& model, const Sentence& sentence,
                                    std::size_t max_len) {
    return ed_decode_greedy(model, ed_encode_state(model, sentence.tokens), max_len);
}

double ed_sentence_loss(EdModel& model, std::span<const TokenId> tokens, double dropout_rate,
                        Rng* dropout_rng, bool grads, double grad_scale) {
    check_tokens(model, tokens);
    const std::size_t n = tokens.size();
    const std::size_t k = model.dim();
    const bool train_mode = dropout_rng != nullptr;
    Rng dummy(0);
    Rng& rng = train_mode ? *dropout_rng : dummy;

    std::vector<nn::LstmStepCache> enc;
    enc.reserve(n);
    Vec h(k, 0.0), c(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const TokenId sym = EdModel::symbol(tokens[n - 1 - i]);
        enc.push_back(nn::lstm_step(model.encoder, model.embedding.row(sym), h, c));
        h = enc.back().h;
        c = enc.back().c;
    }

    struct DecStep {
        TokenId input;
        nn::LstmStepCache cell;
        nn::DropoutResult drop;
        Vec dlogits;
    };
    std::vector<DecStep> dec;
    dec.reserve(n + 1);
    double loss = 0.0;
    for (std::size_t j = 0; j <= n; ++j) {
        const TokenId input = j == 0 ? EdModel::kBos : EdModel::symbol(tokens[j - 1]);
        const TokenId target = j == n ? EdModel::kEos : EdModel::symbol(tokens[j]);
        DecStep st{input, nn::lstm_step(model.decoder, model.embedding.row(input), h, c), {}, {}};
        h = st.cell.h;
        c = st.cell.c;
        st.drop = nn::dropout(st.cell.h, dropout_rate, rng, train_mode);
        auto ce = nn::softmax_cross_entropy(model.projection.apply(st.drop.output), target);
        loss += ce.loss;
        if (grads) {
            for (double& g : ce.grad) {
                g *= grad_scale;
            }
            st.dlogits = std::move(ce.grad);
        }
        dec.push_back(std::move(st));
    }
    if (!grads) {
        return loss;
    }

    Vec dh(k, 0.0), dc(k, 0.0);
    for (std::size_t j = dec.size(); j-- > 0;) {
        const DecStep& st = dec[j];
        Vec dout = model.projection.backward(st.drop.output, st.dlogits);
        Vec dcell_h = nn::dropout_backward(dout, st.drop);
        for (std::size_t i = 0; i < k; ++i) {
            dcell_h[i] += dh[i];
        }
        auto g = nn::lstm_step_backward(model.decoder, st.cell, dcell_h, dc);
        model.embedding.accumulate(st.input, g.dx);
        dh = std::move(g.dh_prev);
        dc = std::move(g.dc_prev);
    }
    for (std::size_t i = enc.size(); i-- > 0;) {
        auto g = nn::lstm_step_backward(model.encoder, enc[i], dh, dc);
        model.embedding.accumulate(EdModel::symbol(tokens[n - 1 - i]), g.dx);
        dh = std::move(g.dh_prev);
        dc = std::move(g.dc_prev);
    }
    return loss;
}

double ed_corpus_loss(const EdModel& model, const std::vector<Sentence>& corpus) {
    double loss = 0.0;
    std::size_t targets = 0;
    auto& m = const_cast<EdModel&>(model); // eval mode touches no state
    for (const auto& s : corpus) {
        loss += ed_sentence_loss(m, s.tokens, 0.0, nullptr, false);
        targets += s.tokens.size() + 1;
    }
    return targets == 0 ? 0.0 : loss / static_cast<double>(targets);
}

Checkpoint EdTrainState::to_checkpoint() const {
    Checkpoint ck;
    auto& cur = const_cast<EdModel&>(current);
    for (const nn::Parameter* p : cur.params()) {
        ck.put("current/" + p->name, p->value);
        ck.put("current/" + p->name + ".accum", p->adagrad_accum);
    }
    const Checkpoint best_ck = best.to_checkpoint();
    for (const auto& [name, t] : best_ck.entries()) {
        ck.put("best/" + name, t);
    }
    ck.put_scalar("epochs_done", static_cast<double>(epochs_done));
    ck.put_scalar("best_epoch", static_cast<double>(best_epoch));
    ck.put_scalar("since_best", static_cast<double>(since_best));
    ck.put_scalar("best_dev_loss", best_dev_loss);
    if (!curve.empty()) {
        Tensor t({curve.size(), 3});
        for (std::size_t i = 0; i < curve.size(); ++i) {
            t.at(i, 0) = static_cast<double>(curve[i].epoch);
            t.at(i, 1) = curve[i].train_loss;
            t.at(i, 2) = curve[i].dev_loss;
        }
        ck.put("curve", std::move(t));
    }
    return ck;
}

EdTrainState EdTrainState::from_checkpoint(const Checkpoint& ck) {
    auto strip = [&](const std::string& prefix) {
        Checkpoint sub;
        for (const auto& [name, t] : ck.entries()) {
            if (name.rfind(prefix, 0) == 0 && name.find(".accum") == std::string::npos) {
                sub.put(name.substr(prefix.size()), t);
            }
        }
        return sub;
    };
    EdTrainState st;
    st.current = EdModel::from_checkpoint(strip("current/"));
    for (nn::Parameter* p : st.current.params()) {
        p->adagrad_accum = ck.get("current/" + p->name + ".accum");
    }
    st.best = EdModel::from_checkpoint(strip("best/"));
    st.epochs_done = static_cast<std::size_t>(ck.get_scalar("epochs_done"));
    st.best_epoch = static_cast<std::size_t>(ck.get_scalar("best_epoch"));
    st.since_best = static_cast<std::size_t>(ck.get_scalar("since_best"));
    st.best_dev_loss = ck.get_scalar("best_dev_loss");
    if (ck.contains("curve")) {
        const Tensor& t = ck.get("curve");
        for (std::size_t i = 0; i < t.rows(); ++i) {
            st.curve.push_back(
                {static_cast<std::size_t>(t.at(i, 0)), t.at(i, 1), t.at(i, 2)});
        }
    }
    return st;
}

EdTrainResult ed_train(const std::vector<Sentence>& train, const std::vector<Sentence>& dev,
                       std::size_t vocab_size, const EdConfig& config, const EdTrainHooks& hooks,
                       std::optional<EdTrainState> resume) {
    if (train.empty() || dev.empty()) {
        throw ConfigError("encoder-decoder training needs nonempty train and dev sets");
    }
    if (config.batch == 0 || config.patience == 0) {
        throw ConfigError("batch size and patience must be positive");
    }
    EdTrainState st;
    if (resume) {
        st = std::move(*resume);
        if (st.current.dim() != config.dim || st.current.vocab_size() != vocab_size) {
            throw ConfigError("resume state does not match the configured model shape");
        }
    } else {
        st.current = EdModel(vocab_size, config.dim);
        Rng init(config.seed);
        st.current.init_uniform(init, config.init_range);
        st.best = st.current;
        st.best_dev_loss = std::numeric_limits<double>::infinity();
    }

    EdModel& model = st.current;
    const nn::ParamRefs params = model.params();
    std::vector<std::size_t> order(train.size());
    bool keep_going = st.since_best < config.patience;

    for (std::size_t epoch = st.epochs_done; keep_going && epoch < config.max_epochs; ++epoch) {
        // Per-epoch streams make a resumed run identical to an uninterrupted one.
        Rng shuffle_rng(derive_seed(config.seed, 2 * epoch + 1));
        Rng dropout_rng(derive_seed(config.seed, 2 * epoch + 2));
        std::iota(order.begin(), order.end(), std::size_t{0});
        shuffle_rng.shuffle(std::span<std::size_t>(order));

        double loss = 0.0;
        std::size_t targets = 0;
        for (std::size_t b = 0; b < order.size(); b += config.batch) {
            const std::size_t end = std::min(order.size(), b + config.batch);
            const double scale = 1.0 / static_cast<double>(end - b);
            for (std::size_t i = b; i < end; ++i) {
                const auto& s = train[order[i]];
                loss += ed_sentence_loss(model, s.tokens, config.dropout, &dropout_rng, true, scale);
                targets += s.tokens.size() + 1;
            }
            nn::clip_gradients(params, config.clip);
            for (nn::Parameter* p : params) {
                nn::adagrad_update(*p, config.lr);
            }
        }
        const double train_loss = loss / static_cast<double>(targets);
        if (!std::isfinite(train_loss)) {
            throw NumericError("encoder-decoder training loss became non-finite in epoch " +
                               std::to_string(epoch + 1) + " (lr " + std::to_string(config.lr) +
                               ", clip " + std::to_string(config.clip) + ")");
        }
        const double dev_loss = ed_corpus_loss(model, dev);
        EdEpochStats stats{epoch + 1, train_loss, dev_loss};
        st.curve.push_back(stats);
        st.epochs_done = epoch + 1;
        if (dev_loss < st.best_dev_loss) {
            st.best_dev_loss = dev_loss;
            st.best_epoch = epoch + 1;
            st.best = model;
            st.since_best = 0;
        } else {
            ++st.since_best;
        }
        if (hooks.save_state) {
            hooks.save_state(st);
        }
        if (hooks.on_epoch && !hooks.on_epoch(stats, model)) {
            keep_going = false;
        }
        if (st.since_best >= config.patience) {
            keep_going = false;
        }
    }

    EdTrainResult result;
    result.model = std::move(st.best);
    result.curve = std::move(st.curve);
    result.best_epoch = st.best_epoch;
    result.best_dev_loss = st.best_dev_loss;
    return result;
}

} // namespace sembprobe
