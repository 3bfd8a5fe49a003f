#include "wgqed/config.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"

namespace wgqed {

using nlohmann::json;

const char* errc_name(Errc code) {
    switch (code) {
    case Errc::NegativeRate: return "NegativeRate";
    case Errc::NonMonotonePositions: return "NonMonotonePositions";
    case Errc::MissingModelBlock: return "MissingModelBlock";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::SingularResolvent: return "SingularResolvent";
    case Errc::DefectiveMatrix: return "DefectiveMatrix";
    case Errc::SeriesOverflow: return "SeriesOverflow";
    case Errc::SingularBubble: return "SingularBubble";
    case Errc::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case Errc::IllConditioned: return "IllConditioned";
    case Errc::BasisTooLarge: return "BasisTooLarge";
    case Errc::ZeroNormalization: return "ZeroNormalization";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::GridTooCoarse: return "GridTooCoarse";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::InsufficientOrder: return "InsufficientOrder";
    case Errc::DegenerateSpectrum: return "DegenerateSpectrum";
    case Errc::NonMonotoneGrid: return "NonMonotoneGrid";
    case Errc::UnknownParameterPath: return "UnknownParameterPath";
    case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

const char* model_name(Model m) {
    switch (m) {
    case Model::TwoLevel: return "two_level";
    case Model::JaynesCummings: return "jaynes_cummings";
    case Model::TwoLevelArray: return "two_level_array";
    case Model::MirrorTwoLevel: return "mirror_two_level";
    case Model::RydbergEitArray: return "rydberg_eit_array";
    }
    return "unknown";
}

Model model_from_name(const std::string& name) {
    if (name == "two_level") return Model::TwoLevel;
    if (name == "jaynes_cummings") return Model::JaynesCummings;
    if (name == "two_level_array") return Model::TwoLevelArray;
    if (name == "mirror_two_level") return Model::MirrorTwoLevel;
    if (name == "rydberg_eit_array") return Model::RydbergEitArray;
    throw Error(Errc::InvalidConfig, "unknown model '" + name + "'");
}

const char* interaction_name(InteractionLaw law) {
    switch (law) {
    case InteractionLaw::Uniform: return "uniform";
    case InteractionLaw::Dipolar: return "dipolar";
    case InteractionLaw::VanDerWaals: return "van_der_waals";
    }
    return "unknown";
}

InteractionLaw interaction_from_name(const std::string& name) {
    if (name == "uniform") return InteractionLaw::Uniform;
    if (name == "dipolar") return InteractionLaw::Dipolar;
    if (name == "van_der_waals") return InteractionLaw::VanDerWaals;
    throw Error(Errc::InvalidConfig, "unknown interaction law '" + name + "'");
}

double rydberg_interaction(const RydbergParams& params, const SystemConfig& config, int i,
                           int j) {
    if (i == j) return 0.0;
    const double dist = params.lattice_units
                            ? static_cast<double>(std::abs(i - j))
                            : std::abs(config.positions[i] - config.positions[j]);
    switch (params.law) {
    case InteractionLaw::Uniform: return params.coefficient;
    case InteractionLaw::Dipolar: return params.coefficient / (dist * dist * dist);
    case InteractionLaw::VanDerWaals: return params.coefficient / std::pow(dist, 6);
    }
    return 0.0;
}

double SystemConfig::spacing() const {
    if (positions.size() < 2) {
        throw Error(Errc::InvalidConfig, "spacing requires at least two emitters");
    }
    return positions[1] - positions[0];
}

namespace {

void check_rates(const std::vector<double>& rates, const char* what) {
    if (rates.empty()) throw Error(Errc::InvalidConfig, std::string(what) + " list is empty");
    for (double r : rates) {
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw Error(Errc::NegativeRate, std::string(what) + " must be finite and >= 0");
        }
    }
}

void broadcast(std::vector<double>& rates, std::size_t n, const char* what) {
    if (rates.size() == 1 && n > 1) rates.assign(n, rates[0]);
    if (rates.size() != n) {
        throw Error(Errc::InvalidConfig,
                    std::string(what) + " list length does not match emitter count");
    }
}

}  // namespace

SystemConfig validate(SystemConfig c) {
    check_rates(c.gamma, "gamma");
    check_rates(c.gamma_f, "gamma_f");
    if (!std::isfinite(c.k0)) throw Error(Errc::InvalidConfig, "k0 must be finite");

    if (c.positions.empty()) throw Error(Errc::InvalidConfig, "positions list is empty");
    std::sort(c.positions.begin(), c.positions.end());
    for (std::size_t i = 1; i < c.positions.size(); ++i) {
        if (!(c.positions[i] > c.positions[i - 1])) {
            throw Error(Errc::NonMonotonePositions, "positions must be strictly increasing");
        }
    }

    const std::size_t n = c.positions.size();
    broadcast(c.gamma, n, "gamma");
    broadcast(c.gamma_f, n, "gamma_f");

    if (!std::isfinite(c.u0)) { c.u0 = kInfSentinel; c.exact_hardcore = true; }
    if (c.u0 < 0.0) throw Error(Errc::NegativeRate, "u0 must be >= 0");

    switch (c.model) {
    case Model::TwoLevel:
    case Model::JaynesCummings:
        if (n != 1) throw Error(Errc::InvalidConfig, "single-emitter model needs one position");
        if (c.model == Model::JaynesCummings && !c.jc) {
            throw Error(Errc::MissingModelBlock, "jaynes_cummings requires the 'jc' block");
        }
        c.positions[0] = 0.0;
        break;
    case Model::TwoLevelArray: {
        const double shift = c.positions.front();
        for (double& x : c.positions) x -= shift;
        if (n >= 2) {
            const double d = c.positions[1] - c.positions[0];
            for (std::size_t i = 1; i < n; ++i) {
                const double di = c.positions[i] - c.positions[i - 1];
                if (std::abs(di - d) > 1e-12 * std::max(1.0, std::abs(d))) {
                    throw Error(Errc::InvalidConfig, "array lattice spacing is not uniform");
                }
            }
        }
        break;
    }
    case Model::MirrorTwoLevel: {
        if (!c.mirror) throw Error(Errc::MissingModelBlock, "mirror_two_level requires 'mirror'");
        if (!(c.mirror->x0 < 0.0)) {
            throw Error(Errc::NonMonotonePositions, "mirror model needs emitter position x0 < 0");
        }
        if (!std::isfinite(c.mirror->gamma_b)) {
            c.mirror->gamma_b = kInfSentinel;
            c.mirror->exact_limit = true;
        }
        if (!(c.mirror->gamma_b > 0.0)) throw Error(Errc::NegativeRate, "gamma_b must be > 0");
        if (n != 1) throw Error(Errc::InvalidConfig, "mirror model uses a single emitter");
        c.positions[0] = c.mirror->x0;
        break;
    }
    case Model::RydbergEitArray: {
        if (!c.rydberg) {
            throw Error(Errc::MissingModelBlock, "rydberg_eit_array requires 'rydberg'");
        }
        const double shift = c.positions.front();
        for (double& x : c.positions) x -= shift;
        if (n >= 2) {
            const double d = c.positions[1] - c.positions[0];
            for (std::size_t i = 1; i < n; ++i) {
                const double di = c.positions[i] - c.positions[i - 1];
                if (std::abs(di - d) > 1e-12 * std::max(1.0, std::abs(d))) {
                    throw Error(Errc::InvalidConfig, "array lattice spacing is not uniform");
                }
            }
        }
        if (!std::isfinite(c.rydberg->u0)) {
            c.rydberg->u0 = kInfSentinel;
            c.rydberg->exact_hardcore = true;
        }
        if (c.rydberg->u0 < 0.0) throw Error(Errc::NegativeRate, "rydberg u0 must be >= 0");
        if (!(c.rydberg->omega >= 0.0)) throw Error(Errc::NegativeRate, "omega must be >= 0");
        break;
    }
    }
    return c;
}

namespace {

std::vector<double> rate_list(const json& j) {
    if (j.is_number()) return {j.get<double>()};
    return j.get<std::vector<double>>();
}

double inf_or_number(const json& j) {
    if (j.is_string()) {
        if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
        throw Error(Errc::InvalidConfig, "expected number or \"inf\"");
    }
    return j.get<double>();
}

}  // namespace

SystemConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("config parse failed: ") + e.what());
    }
    try {
        SystemConfig c;
        c.model = model_from_name(j.at("model").get<std::string>());
        if (j.contains("gamma")) c.gamma = rate_list(j["gamma"]);
        if (j.contains("gamma_f")) c.gamma_f = rate_list(j["gamma_f"]);
        c.k0 = j.value("k0", 0.0);
        double spacing_hint = 0.0;
        if (j.contains("positions")) {
            c.positions = j["positions"].get<std::vector<double>>();
        } else if (j.contains("array")) {
            const int count = j["array"].at("n").get<int>();
            const double d = j["array"].at("spacing").get<double>();
            if (count < 1) throw Error(Errc::InvalidConfig, "array.n must be >= 1");
            c.positions.resize(count);
            for (int i = 0; i < count; ++i) c.positions[i] = i * d;
            spacing_hint = d;
        } else {
            c.positions = {0.0};
        }
        // carrier phase fixed per lattice period: k0 = k0_d / spacing, so a
        // spacing sweep holds the Markov physics fixed
        if (j.contains("k0_d")) {
            if (spacing_hint == 0.0 && c.positions.size() >= 2) {
                spacing_hint = c.positions[1] - c.positions[0];
            }
            if (c.model == Model::MirrorTwoLevel && j.contains("mirror")) {
                spacing_hint = std::abs(j["mirror"].at("x0").get<double>());
            }
            if (spacing_hint == 0.0) {
                throw Error(Errc::InvalidConfig, "k0_d needs an array spacing or mirror x0");
            }
            c.k0 = j["k0_d"].get<double>() / spacing_hint;
        }
        if (j.contains("u0")) c.u0 = inf_or_number(j["u0"]);
        if (j.contains("exact_hardcore")) c.exact_hardcore = j["exact_hardcore"].get<bool>();
        if (j.contains("jc")) {
            JcParams p;
            p.g = j["jc"].at("g").get<double>();
            p.delta_c = j["jc"].value("delta_c", 0.0);
            p.delta_e = j["jc"].value("delta_e", 0.0);
            c.jc = p;
        }
        if (j.contains("mirror")) {
            MirrorParams p;
            p.x0 = j["mirror"].at("x0").get<double>();
            if (j["mirror"].contains("gamma_b")) p.gamma_b = inf_or_number(j["mirror"]["gamma_b"]);
            if (j["mirror"].contains("exact_limit")) {
                p.exact_limit = j["mirror"]["exact_limit"].get<bool>();
            } else {
                p.exact_limit = !std::isfinite(p.gamma_b);
            }
            c.mirror = p;
        }
        if (j.contains("rydberg")) {
            RydbergParams p;
            const json& r = j["rydberg"];
            p.omega = r.at("omega").get<double>();
            p.delta_e = r.value("delta_e", 0.0);
            if (!r.contains("delta_s")) {
                throw Error(Errc::MissingModelBlock, "rydberg block requires delta_s");
            }
            p.delta_s = r["delta_s"].get<double>();
            if (r.contains("u0")) p.u0 = inf_or_number(r["u0"]);
            p.exact_hardcore = r.value("exact_hardcore", !std::isfinite(p.u0));
            if (r.contains("interaction")) {
                p.law = interaction_from_name(r["interaction"].at("law").get<std::string>());
                p.coefficient = r["interaction"].at("coefficient").get<double>();
                p.lattice_units = r["interaction"].value("lattice_units", true);
            }
            c.rydberg = p;
        }
        return validate(std::move(c));
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("config field error: ") + e.what());
    }
}

std::string config_to_json(const SystemConfig& c) {
    json j;
    j["model"] = model_name(c.model);
    j["gamma"] = c.gamma;
    j["gamma_f"] = c.gamma_f;
    j["k0"] = c.k0;
    j["positions"] = c.positions;
    j["u0"] = c.u0;
    j["exact_hardcore"] = c.exact_hardcore;
    if (c.jc) j["jc"] = {{"g", c.jc->g}, {"delta_c", c.jc->delta_c}, {"delta_e", c.jc->delta_e}};
    if (c.mirror) {
        j["mirror"] = {{"x0", c.mirror->x0},
                       {"gamma_b", c.mirror->gamma_b},
                       {"exact_limit", c.mirror->exact_limit}};
    }
    if (c.rydberg) {
        j["rydberg"] = {{"omega", c.rydberg->omega},
                        {"delta_e", c.rydberg->delta_e},
                        {"delta_s", c.rydberg->delta_s},
                        {"u0", c.rydberg->u0},
                        {"exact_hardcore", c.rydberg->exact_hardcore},
                        {"interaction",
                         {{"law", interaction_name(c.rydberg->law)},
                          {"coefficient", c.rydberg->coefficient},
                          {"lattice_units", c.rydberg->lattice_units}}}};
    }
    return j.dump(2);
}

Wavepacket wavepacket_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(Errc::InvalidConfig, std::string("wavepacket parse failed: ") + e.what());
    }
    Wavepacket w;
    const std::string dir = j.value("direction", "right");
    if (dir == "right") {
        w.direction = Direction::Right;
    } else if (dir == "left") {
        w.direction = Direction::Left;
    } else {
        throw Error(Errc::InvalidConfig, "wavepacket direction must be right|left");
    }
    w.width_rate = j.at("width_rate").get<double>();
    if (!(w.width_rate > 0.0)) throw Error(Errc::NegativeRate, "width_rate must be > 0");
    w.center = j.value("center", 0.0);
    return w;
}

}  // namespace wgqed
