#include "smat/mae_encoder.hpp"

#include <stdexcept>

namespace smat::mae {

namespace {

std::string level(int i) { return std::to_string(i); }

nn::Var position_of(nn::Graph& g, const nn::FeatureMap& m, const MaeConfig& cfg) {
    if (!cfg.positional) return {};
    return g.constant(nn::positional_encoding(m, m.channels()));
}

nn::FeatureMap with_tokens(const nn::FeatureMap& like, nn::Var tokens) {
    nn::FeatureMap out = like;
    out.tokens = tokens;
    return out;
}

nn::FeatureMap upsample_to(const nn::FeatureMap& m, const nn::FeatureMap& target) {
    const int factor = target.height / m.height;
    if (factor * m.height != target.height || factor * m.width != target.width)
        throw std::invalid_argument("mae: level sizes are not integer multiples");
    if (factor == 1) return m;
    nn::FeatureMap out = target;
    out.tokens = ag::upsample_nearest(m.tokens, m.height, m.width, factor);
    return out;
}

bool uses_all_levels(Fusion f) { return f == Fusion::late || f == Fusion::early; }

} // namespace

Similarity parse_similarity(const std::string& s) {
    if (s == "attention") return Similarity::attention;
    if (s == "cosine") return Similarity::cosine;
    if (s == "euclidean") return Similarity::euclidean;
    if (s == "xcorr") return Similarity::xcorr;
    throw std::invalid_argument("unknown similarity kind: " + s);
}

Fusion parse_fusion(const std::string& s) {
    if (s == "late") return Fusion::late;
    if (s == "early") return Fusion::early;
    if (s == "c2") return Fusion::c2;
    if (s == "c5") return Fusion::c5;
    throw std::invalid_argument("unknown fusion strategy: " + s);
}

std::string to_string(Similarity s) {
    switch (s) {
    case Similarity::attention: return "attention";
    case Similarity::cosine: return "cosine";
    case Similarity::euclidean: return "euclidean";
    case Similarity::xcorr: return "xcorr";
    }
    return "?";
}

std::string to_string(Fusion f) {
    switch (f) {
    case Fusion::late: return "late";
    case Fusion::early: return "early";
    case Fusion::c2: return "c2";
    case Fusion::c5: return "c5";
    }
    return "?";
}

void init_mae(nn::ParameterSet& ps, const std::string& name, const MaeConfig& cfg, Rng& rng) {
    if (cfg.width % cfg.heads != 0) throw std::invalid_argument("mae: width not divisible by heads");
    const int d = cfg.width;
    const bool attn = cfg.similarity == Similarity::attention;
    for (int i = 2; i <= 5; ++i) {
        const bool needed = uses_all_levels(cfg.fusion) || (cfg.fusion == Fusion::c2 && i == 2) ||
                            (cfg.fusion == Fusion::c5 && i == 5);
        if (!needed) continue;
        nn::init_linear(ps, name + ".level" + level(i) + ".proj", cfg.in_channels[static_cast<std::size_t>(i - 2)], d, rng);
        if (attn && cfg.fusion != Fusion::early)
            for (int b = 0; b < cfg.depth; ++b)
                nn::init_attention_block(ps, name + ".level" + level(i) + ".cross.block" + std::to_string(b), d,
                                         cfg.ffn_hidden, rng);
    }
    if (uses_all_levels(cfg.fusion)) {
        for (int i = 2; i <= 4; ++i) {
            nn::init_linear(ps, name + ".fpn.lateral" + level(i), d, d, rng);
            nn::init_conv(ps, name + ".fpn.smooth" + level(i), 3, d, d, rng);
        }
        nn::init_linear(ps, name + ".merge", 4 * d, d, rng);
    }
    if (cfg.fusion == Fusion::early && attn)
        for (int b = 0; b < cfg.depth; ++b)
            nn::init_attention_block(ps, name + ".early_cross.block" + std::to_string(b), d, cfg.ffn_hidden, rng);
    nn::init_attention_block(ps, name + ".self", d, cfg.ffn_hidden, rng);
}

nn::FeatureMap project(nn::Graph& g, nn::ParameterSet& ps, const std::string& name, const nn::FeatureMap& c) {
    return with_tokens(c, nn::linear(g, ps, name, c.tokens));
}

nn::FeatureMap attention_similarity(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                    const nn::FeatureMap& search, const nn::FeatureMap& templ, const MaeConfig& cfg) {
    if (search.channels() != templ.channels())
        throw std::invalid_argument("attention_similarity: channel mismatch after projection");
    nn::Var pos_s = position_of(g, search, cfg);
    nn::Var pos_t = position_of(g, templ, cfg);
    nn::Var x = search.tokens;
    for (int b = 0; b < cfg.depth; ++b)
        x = nn::attention_block(g, ps, name + ".block" + std::to_string(b), x, templ.tokens, pos_s, pos_t, cfg.heads);
    return with_tokens(search, x);
}

nn::Var similarity_map(const nn::FeatureMap& search, const nn::FeatureMap& templ, Similarity kind) {
    if (search.channels() != templ.channels())
        throw std::invalid_argument("similarity_map: channel mismatch");
    switch (kind) {
    case Similarity::cosine:
        return ag::row_max(ag::matmul(ag::l2_normalize_rows(search.tokens),
                                      ag::transpose(ag::l2_normalize_rows(templ.tokens))));
    case Similarity::euclidean:
        return ag::row_min(ag::pairwise_distance(search.tokens, templ.tokens));
    case Similarity::xcorr:
        return ag::depthwise_xcorr(search.tokens, search.height, search.width, templ.tokens, templ.height,
                                   templ.width);
    case Similarity::attention:
        break;
    }
    throw std::invalid_argument("similarity_map: attention is not a closed-form similarity");
}

nn::FeatureMap alt_similarity(const nn::FeatureMap& search, const nn::FeatureMap& templ, Similarity kind) {
    nn::Var m = similarity_map(search, templ, kind);
    switch (kind) {
    case Similarity::cosine: return with_tokens(search, ag::mul_col(search.tokens, m));
    case Similarity::euclidean: return with_tokens(search, ag::mul_col(search.tokens, ag::reciprocal_one_plus(m)));
    case Similarity::xcorr: return with_tokens(search, ag::mul(search.tokens, m));
    case Similarity::attention: break;
    }
    throw std::invalid_argument("alt_similarity: unsupported kind");
}

nn::FeatureMap cross_similarity(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                const nn::FeatureMap& c_search, const nn::FeatureMap& c_templ, const MaeConfig& cfg) {
    const nn::FeatureMap es = project(g, ps, name + ".proj", c_search);
    const nn::FeatureMap et = project(g, ps, name + ".proj", c_templ);
    if (cfg.similarity == Similarity::attention) return attention_similarity(g, ps, name + ".cross", es, et, cfg);
    return alt_similarity(es, et, cfg.similarity);
}

std::array<nn::FeatureMap, 4> fpn_propagate(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                            const std::array<nn::FeatureMap, 4>& p) {
    std::array<nn::FeatureMap, 4> out = p;
    for (int i = 5; i >= 3; --i) {
        const nn::FeatureMap& top = out[static_cast<std::size_t>(i - 2)];
        const nn::FeatureMap& below = p[static_cast<std::size_t>(i - 3)];
        nn::Var lateral = nn::linear(g, ps, name + ".lateral" + level(i - 1), below.tokens);
        nn::Var merged = ag::add(lateral, upsample_to(top, below).tokens);
        out[static_cast<std::size_t>(i - 3)] = nn::conv(g, ps, name + ".smooth" + level(i - 1),
                                                        with_tokens(below, merged), 3, 1, 1);
        out[static_cast<std::size_t>(i - 3)].stride = below.stride;
        out[static_cast<std::size_t>(i - 3)].frame = below.frame;
    }
    return out;
}

nn::FeatureMap concat_fuse(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                           const std::array<nn::FeatureMap, 4>& p) {
    const nn::FeatureMap& base = p[0];
    std::vector<nn::Var> parts{base.tokens};
    for (std::size_t i = 1; i < 4; ++i) parts.push_back(upsample_to(p[i], base).tokens);
    return with_tokens(base, nn::linear(g, ps, name, ag::concat_cols(parts)));
}

nn::FeatureMap multiscale_merge(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                const std::array<nn::FeatureMap, 4>& p, const MaeConfig& cfg) {
    const nn::FeatureMap u = concat_fuse(g, ps, name + ".merge", p);
    nn::Var pos = position_of(g, u, cfg);
    return with_tokens(u, nn::attention_block(g, ps, name + ".self", u.tokens, u.tokens, pos, pos, cfg.heads));
}

nn::FeatureMap encode(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                      const backbone::MultiScaleFeatures& search, const backbone::MultiScaleFeatures& templ,
                      const MaeConfig& cfg) {
    auto self_attend = [&](const nn::FeatureMap& u) {
        nn::Var pos = position_of(g, u, cfg);
        return with_tokens(u, nn::attention_block(g, ps, name + ".self", u.tokens, u.tokens, pos, pos, cfg.heads));
    };
    auto similarity_at = [&](int i) {
        return cross_similarity(g, ps, name + ".level" + level(i), search.c(i), templ.c(i), cfg);
    };

    switch (cfg.fusion) {
    case Fusion::late: {
        std::array<nn::FeatureMap, 4> p;
        for (int i = 2; i <= 5; ++i) p[static_cast<std::size_t>(i - 2)] = similarity_at(i);
        return multiscale_merge(g, ps, name, fpn_propagate(g, ps, name + ".fpn", p), cfg);
    }
    case Fusion::early: {
        std::array<nn::FeatureMap, 4> es, et;
        for (int i = 2; i <= 5; ++i) {
            const std::string pn = name + ".level" + level(i) + ".proj";
            es[static_cast<std::size_t>(i - 2)] = project(g, ps, pn, search.c(i));
            et[static_cast<std::size_t>(i - 2)] = project(g, ps, pn, templ.c(i));
        }
        const nn::FeatureMap us = concat_fuse(g, ps, name + ".merge", fpn_propagate(g, ps, name + ".fpn", es));
        const nn::FeatureMap ut = concat_fuse(g, ps, name + ".merge", fpn_propagate(g, ps, name + ".fpn", et));
        const nn::FeatureMap fused = cfg.similarity == Similarity::attention
                                         ? attention_similarity(g, ps, name + ".early_cross", us, ut, cfg)
                                         : alt_similarity(us, ut, cfg.similarity);
        return self_attend(fused);
    }
    case Fusion::c2:
        return self_attend(similarity_at(2));
    case Fusion::c5:
        return self_attend(upsample_to(similarity_at(5), search.c(2)));
    }
    throw std::invalid_argument("mae: unknown fusion");
}

} // namespace smat::mae
