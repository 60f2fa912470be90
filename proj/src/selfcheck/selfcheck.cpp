#include "sembprobe/selfcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sembprobe/ed_model.hpp"
#include "sembprobe/embedding_io.hpp"
#include "sembprobe/error.hpp"
#include "sembprobe/eval.hpp"
#include "sembprobe/gradcheck.hpp"
#include "sembprobe/lstm.hpp"
#include "sembprobe/probe.hpp"
#include "sembprobe/skipgram.hpp"
#include "sembprobe/tasks.hpp"
#include "sembprobe/toy_language.hpp"

namespace sembprobe {

namespace {

constexpr double kGradTolerance = 1e-5;
constexpr double kHsTolerance = 1e-9;

CheckOutcome timed(const std::string& name, const std::function<void(CheckOutcome&)>& body) {
    CheckOutcome out;
    out.name = name;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        body(out);
    } catch (const std::exception& e) {
        out.passed = false;
        out.detail = std::string("exception: ") + e.what();
    }
    out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

void zero(const nn::ParamRefs& params) {
    for (auto* p : params) {
        p->zero_grad();
    }
}

Vec random_vec(Rng& rng, std::size_t n) {
    Vec v(n);
    for (double& x : v) {
        x = rng.uniform(-1.0, 1.0);
    }
    return v;
}

} // namespace

CheckOutcome check_gradients() {
    return timed("gradients", [](CheckOutcome& out) {
        Rng rng(101);
        std::map<std::string, double> errors;

        nn::LinearLayer layer("linear", 5, 3);
        layer.weight.init_uniform(rng, 1.0);
        layer.bias.init_uniform(rng, 1.0);
        const Vec x = random_vec(rng, 5);
        const Vec wy = random_vec(rng, 3);
        errors["linear"] = nn::grad_check(
            [&] {
                zero(layer.params());
                const Vec y = layer.forward(x);
                layer.backward(wy);
                double l = 0.0;
                for (std::size_t i = 0; i < y.size(); ++i) {
                    l += wy[i] * y[i];
                }
                return l;
            },
            layer.params()).max_relative_error;

        nn::Parameter logits("logits", {6});
        logits.init_uniform(rng, 2.0);
        errors["softmax_ce"] = nn::grad_check(
            [&] {
                auto ce = nn::softmax_cross_entropy(logits.value.data(), 4);
                std::copy(ce.grad.begin(), ce.grad.end(), logits.grad.data().begin());
                return ce.loss;
            },
            {&logits}).max_relative_error;

        ProbeMLP probe(6, 3, 0.5);
        probe.init_uniform(rng, 0.5);
        const Vec px = random_vec(rng, 6);
        errors["probe_mlp"] = nn::grad_check(
            [&] {
                zero(probe.params());
                Rng mask(5);
                return probe_example_loss(probe, px, 2, &mask, true);
            },
            probe.params()).max_relative_error;

        nn::LstmCellParams cell("cell", 4, 3);
        for (auto* p : cell.params()) {
            p->init_uniform(rng, 0.5);
        }
        const Vec lx = random_vec(rng, 4), h0 = random_vec(rng, 3), c0 = random_vec(rng, 3);
        const Vec wh = random_vec(rng, 3), wc = random_vec(rng, 3);
        errors["lstm_step"] = nn::grad_check(
            [&] {
                zero(cell.params());
                auto s = nn::lstm_step(cell, lx, h0, c0);
                nn::lstm_step_backward(cell, s, wh, wc);
                double l = 0.0;
                for (std::size_t j = 0; j < 3; ++j) {
                    l += wh[j] * s.h[j] + wc[j] * s.c[j];
                }
                return l;
            },
            cell.params()).max_relative_error;

        EdModel ed(7, 4);
        ed.init_uniform(rng, 0.5);
        const std::vector<TokenId> sentence{3, 0, 6, 2, 3};
        const auto ed_params = ed.params();
        errors["ed_unroll_5"] = nn::grad_check(
            [&] {
                zero(ed_params);
                return ed_sentence_loss(ed, sentence, 0.0, nullptr, true);
            },
            ed_params).max_relative_error;

        out.passed = true;
        std::ostringstream detail;
        for (const auto& [name, err] : errors) {
            out.passed = out.passed && err < kGradTolerance;
            detail << name << "=" << format_double(err) << " ";
        }
        out.detail = detail.str();
    });
}

CheckOutcome check_hs_normalization() {
    return timed("hs_normalization", [](CheckOutcome& out) {
        Rng rng(202);
        std::vector<std::uint64_t> counts(1000);
        for (auto& c : counts) {
            c = 1 + rng.below(1000);
        }
        SkipGramModel m(counts, 16, 5);
        m.input.vectors.init_uniform(rng, 1.0);
        m.nodes.init_uniform(rng, 1.0);
        double worst = 0.0;
        for (int i = 0; i < 100; ++i) {
            const auto center = static_cast<TokenId>(rng.below(counts.size()));
            double sum = 0.0;
            for (TokenId c = 0; c < counts.size(); ++c) {
                sum += hs_probability(m, center, c);
            }
            worst = std::max(worst, std::abs(sum - 1.0));
        }
        out.passed = worst <= kHsTolerance;
        out.detail = "max |sum-1| = " + format_double(worst);
    });
}

CheckOutcome check_task_structure() {
    return timed("task_structure", [](CheckOutcome& out) {
        ToyLanguageConfig toy;
        toy.min_len = 5;
        toy.max_len = 30;
        std::vector<Tokens> raw;
        for (const auto& line : generate_toy_corpus(500, toy, 303)) {
            raw.push_back(tokenize(line));
        }
        const Vocabulary vocab = Vocabulary::build(raw);
        std::vector<Sentence> sentences;
        for (std::size_t i = 0; i < raw.size(); ++i) {
            sentences.push_back({vocab.encode(raw[i]), i});
        }
        std::map<std::uint64_t, const Sentence*> by_id;
        for (const auto& s : sentences) {
            by_id[s.source_id] = &s;
        }
        std::vector<std::string> failures;
        auto fail = [&](const std::string& f) {
            if (failures.size() < 5) {
                failures.push_back(f);
            }
        };

        const TaskDataset content = sample_content_task(sentences, 7);
        std::size_t pos = 0, neg = 0;
        std::set<TokenId> pool;
        for (const auto& inst : content.instances) {
            if (inst.label == 1) {
                pool.insert(inst.meta.words[0]);
            }
        }
        for (const auto& inst : content.instances) {
            const auto& toks = by_id.at(inst.meta.sent_id)->tokens;
            const TokenId w = inst.meta.words.at(0);
            const bool present = std::find(toks.begin(), toks.end(), w) != toks.end();
            if (inst.label == 1) {
                ++pos;
                if (!present) {
                    fail("content positive absent from sentence " + std::to_string(inst.meta.sent_id));
                }
            } else {
                ++neg;
                if (present) {
                    fail("content negative present in sentence " + std::to_string(inst.meta.sent_id));
                }
                if (!pool.count(w)) {
                    fail("content negative outside the positive pool");
                }
            }
        }
        if (pos != neg || pos == 0) {
            fail("content unbalanced " + std::to_string(pos) + "/" + std::to_string(neg));
        }

        const TaskDataset order = sample_order_task(sentences, 9);
        std::map<std::uint64_t, std::vector<const TaskInstance*>> per_sentence;
        for (const auto& inst : order.instances) {
            per_sentence[inst.meta.sent_id].push_back(&inst);
        }
        pos = neg = 0;
        for (const auto& [id, insts] : per_sentence) {
            if (insts.size() != 2 || insts[0]->label == insts[1]->label) {
                fail("order sentence " + std::to_string(id) + " lacks one positive and one negative");
                continue;
            }
            const auto& p = insts[0]->label == 1 ? insts[0]->meta : insts[1]->meta;
            const auto& n = insts[0]->label == 1 ? insts[1]->meta : insts[0]->meta;
            ++pos;
            ++neg;
            const auto& toks = by_id.at(id)->tokens;
            const bool positive_ok = p.positions.size() == 2 && p.positions[0] < p.positions[1] &&
                                     toks[p.positions[0]] == p.words[0] &&
                                     toks[p.positions[1]] == p.words[1] && p.words[0] != p.words[1];
            const bool mirror_ok = n.words.size() == 2 && n.words[0] == p.words[1] &&
                                   n.words[1] == p.words[0] && n.positions.size() == 2 &&
                                   n.positions[0] == p.positions[1] && n.positions[1] == p.positions[0];
            if (!positive_ok) {
                fail("order positive inconsistent with sentence " + std::to_string(id));
            }
            if (!mirror_ok) {
                fail("order negative not the swapped mirror in sentence " + std::to_string(id));
            }
        }
        if (pos != neg || pos == 0) {
            fail("order unbalanced");
        }

        out.passed = failures.empty();
        std::ostringstream detail;
        detail << content.instances.size() << " content and " << order.instances.size()
               << " order instances";
        for (const auto& f : failures) {
            detail << "; " << f;
        }
        out.detail = detail.str();
    });
}

CheckOutcome check_statistics() {
    return timed("statistics", [](CheckOutcome& out) {
        std::vector<std::string> failures;
        const std::vector<std::uint8_t> a{1, 0, 1, 1}, b{0, 0, 1, 0};
        const auto ab = paired_t_test(a, b);
        const auto ba = paired_t_test(b, a);
        // mean 0.5, sd 0.5773..., n 4: t = sqrt(3); two-sided p for df 3 is 1/2 - 1/pi.
        if (std::abs(ab.t - std::sqrt(3.0)) > 1e-6 || ab.df != 3) {
            failures.push_back("t-test example gave t=" + format_double(ab.t));
        }
        if (std::abs(ab.p_value - (0.5 - 1.0 / 3.14159265358979323846)) > 1e-9) {
            failures.push_back("t-test p=" + format_double(ab.p_value));
        }
        if (ab.t != -ba.t || ab.p_value != ba.p_value) {
            failures.push_back("t-test not antisymmetric");
        }
        bool degenerate = false;
        try {
            paired_t_test(a, a);
        } catch (const DegenerateError&) {
            degenerate = true;
        }
        if (!degenerate) {
            failures.push_back("zero-variance input not reported as degenerate");
        }
        const Tokens cand(7, "the");
        const Tokens ref{"the", "cat", "is", "on", "the", "mat"};
        const auto r = bleu(std::vector<Tokens>{cand}, std::vector<Tokens>{ref});
        if (r.precisions.empty() || r.precisions[0] != 2.0 / 7.0) {
            failures.push_back("clipped unigram precision is not 2/7");
        }
        const auto same = bleu(std::vector<Tokens>{ref}, std::vector<Tokens>{ref});
        if (same.score != 1.0) {
            failures.push_back("identical corpus BLEU " + format_double(same.score));
        }
        out.passed = failures.empty();
        out.detail = "t=" + format_double(ab.t) + " df=" + std::to_string(ab.df) +
                     " p=" + format_double(ab.p_value);
        for (const auto& f : failures) {
            out.detail += "; " + f;
        }
    });
}

std::vector<CheckOutcome> run_selfcheck() {
    return {check_gradients(), check_hs_normalization(), check_task_structure(),
            check_statistics()};
}

} // namespace sembprobe
