#pragma once

#include "dodge/sim.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <system_error>
#include <unistd.h>
#include <vector>

namespace dodge
{

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Scenario files: a small TOML subset. Supported: comments, [table],
// [[array-of-tables]], key = number | bool | "string" | [array].

struct TomlValue
{
    enum class Kind
    {
        Number,
        Bool,
        String,
        Array,
    };
    Kind kind = Kind::Number;
    double number = 0.0;
    bool boolean = false;
    std::string string;
    std::vector<TomlValue> array;
};

struct TomlTable
{
    std::string name;
    bool arrayElement = false;
    int line = 0;
    std::vector<std::pair<std::string, TomlValue>> entries;
};

namespace toml_detail
{

inline std::string trim(const std::string &s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::string stripComment(const std::string &s)
{
    bool inString = false;
    for (std::size_t i = 0; i < s.size(); ++i)
    {
        if (s[i] == '"')
            inString = !inString;
        else if (s[i] == '#' && !inString)
            return s.substr(0, i);
    }
    return s;
}

class ValueParser
{
public:
    ValueParser(const std::string &text, std::string where) : s_(text), where_(std::move(where)) {}

    TomlValue parse()
    {
        TomlValue v = value();
        skipSpace();
        if (pos_ != s_.size())
            fail("trailing characters");
        return v;
    }

private:
    [[noreturn]] void fail(const std::string &msg) const { throw ValidationError(where_ + ": " + msg); }

    void skipSpace()
    {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t'))
            ++pos_;
    }

    TomlValue value()
    {
        skipSpace();
        if (pos_ >= s_.size())
            fail("missing value");
        const char c = s_[pos_];
        if (c == '[')
            return arrayValue();
        if (c == '"')
            return stringValue();
        if (s_.compare(pos_, 4, "true") == 0)
        {
            pos_ += 4;
            TomlValue v;
            v.kind = TomlValue::Kind::Bool;
            v.boolean = true;
            return v;
        }
        if (s_.compare(pos_, 5, "false") == 0)
        {
            pos_ += 5;
            TomlValue v;
            v.kind = TomlValue::Kind::Bool;
            return v;
        }
        return numberValue();
    }

    TomlValue arrayValue()
    {
        ++pos_;
        TomlValue v;
        v.kind = TomlValue::Kind::Array;
        skipSpace();
        if (pos_ < s_.size() && s_[pos_] == ']')
        {
            ++pos_;
            return v;
        }
        for (;;)
        {
            v.array.push_back(value());
            skipSpace();
            if (pos_ >= s_.size())
                fail("unterminated array");
            if (s_[pos_] == ',')
            {
                ++pos_;
                skipSpace();
                if (pos_ < s_.size() && s_[pos_] == ']')
                {
                    ++pos_;
                    return v;
                }
                continue;
            }
            if (s_[pos_] == ']')
            {
                ++pos_;
                return v;
            }
            fail("expected ',' or ']' in array");
        }
    }

    TomlValue stringValue()
    {
        ++pos_;
        TomlValue v;
        v.kind = TomlValue::Kind::String;
        while (pos_ < s_.size() && s_[pos_] != '"')
        {
            if (s_[pos_] == '\\' && pos_ + 1 < s_.size())
                ++pos_;
            v.string.push_back(s_[pos_++]);
        }
        if (pos_ >= s_.size())
            fail("unterminated string");
        ++pos_;
        return v;
    }

    TomlValue numberValue()
    {
        std::size_t end = pos_;
        while (end < s_.size() && s_[end] != ',' && s_[end] != ']' && s_[end] != ' ' && s_[end] != '\t')
            ++end;
        std::string tok = s_.substr(pos_, end - pos_);
        tok.erase(std::remove(tok.begin(), tok.end(), '_'), tok.end());
        if (!tok.empty() && tok[0] == '+')
            tok.erase(0, 1);
        TomlValue v;
        if (tok == "inf")
            v.number = std::numeric_limits<double>::infinity();
        else if (tok == "-inf")
            v.number = -std::numeric_limits<double>::infinity();
        else
        {
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v.number);
            if (tok.empty() || res.ec != std::errc() || res.ptr != tok.data() + tok.size())
                fail("cannot parse value '" + s_.substr(pos_, end - pos_) + "'");
        }
        pos_ = end;
        return v;
    }

    const std::string &s_;
    std::string where_;
    std::size_t pos_ = 0;
};

} // namespace toml_detail

// Tables in file order; the first one is the unnamed root.
inline std::vector<TomlTable> parseToml(const std::string &text)
{
    std::vector<TomlTable> tables(1);
    std::istringstream in(text);
    std::string raw;
    int lineNo = 0;
    while (std::getline(in, raw))
    {
        ++lineNo;
        const std::string line = toml_detail::trim(toml_detail::stripComment(raw));
        if (line.empty())
            continue;
        const std::string where = "line " + std::to_string(lineNo);
        if (line.rfind("[[", 0) == 0)
        {
            if (line.size() < 4 || line.substr(line.size() - 2) != "]]")
                throw ValidationError(where + ": malformed table header");
            tables.push_back({toml_detail::trim(line.substr(2, line.size() - 4)), true, lineNo, {}});
            continue;
        }
        if (line[0] == '[')
        {
            if (line.back() != ']')
                throw ValidationError(where + ": malformed table header");
            const std::string name = toml_detail::trim(line.substr(1, line.size() - 2));
            for (const auto &t : tables)
            {
                if (!t.arrayElement && t.name == name)
                    throw ValidationError(name + ": table defined twice (" + where + ")");
            }
            tables.push_back({name, false, lineNo, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ValidationError(where + ": expected key = value");
        const std::string key = toml_detail::trim(line.substr(0, eq));
        if (key.empty())
            throw ValidationError(where + ": empty key");
        TomlTable &cur = tables.back();
        const std::string path = cur.name.empty() ? key : cur.name + "." + key;
        for (const auto &e : cur.entries)
        {
            if (e.first == key)
                throw ValidationError(path + ": duplicate key (" + where + ")");
        }
        cur.entries.emplace_back(key, toml_detail::ValueParser(line.substr(eq + 1), path).parse());
    }
    return tables;
}

// Scenario plus the Monte-Carlo sweep it is run over.
struct ScenarioFile
{
    ScenarioConfig scenario;
    SweepAxes sweep;
};

namespace scenario_detail
{

using Setter = std::function<void(const TomlValue &, const std::string &)>;
using FieldMap = std::map<std::string, Setter>;

inline double asNumber(const TomlValue &v, const std::string &path)
{
    require(v.kind == TomlValue::Kind::Number, path + ": expected a number");
    return v.number;
}

inline long long asInteger(const TomlValue &v, const std::string &path)
{
    const double d = asNumber(v, path);
    require(std::isfinite(d) && d == std::floor(d) && std::abs(d) < 9.0e15, path + ": expected an integer");
    return static_cast<long long>(d);
}

inline Vec3 asVec3(const TomlValue &v, const std::string &path)
{
    require(v.kind == TomlValue::Kind::Array && v.array.size() == 3, path + ": expected an array of 3 numbers");
    return Vec3(asNumber(v.array[0], path), asNumber(v.array[1], path), asNumber(v.array[2], path));
}

inline Setter num(double &dst)
{
    return [&dst](const TomlValue &v, const std::string &p) { dst = asNumber(v, p); };
}

inline Setter integer(int &dst)
{
    return [&dst](const TomlValue &v, const std::string &p) {
        const long long i = asInteger(v, p);
        require(i >= std::numeric_limits<int>::min() && i <= std::numeric_limits<int>::max(), p + ": out of range");
        dst = static_cast<int>(i);
    };
}

inline Setter vec3(Vec3 &dst)
{
    return [&dst](const TomlValue &v, const std::string &p) { dst = asVec3(v, p); };
}

inline Setter boolean(bool &dst)
{
    return [&dst](const TomlValue &v, const std::string &p) {
        require(v.kind == TomlValue::Kind::Bool, p + ": expected true or false");
        dst = v.boolean;
    };
}

inline void apply(const TomlTable &t, const FieldMap &fields, const std::string &prefix)
{
    for (const auto &[key, value] : t.entries)
    {
        const std::string path = prefix + "." + key;
        const auto it = fields.find(key);
        require(it != fields.end(), path + ": unknown field");
        it->second(value, path);
    }
}

inline FieldMap scenarioFields(ScenarioConfig &s)
{
    return {
        {"seed",
         [&s](const TomlValue &v, const std::string &p) {
             const long long i = asInteger(v, p);
             require(i >= 0, p + ": must be >= 0");
             s.seed = static_cast<std::uint64_t>(i);
         }},
        {"uav_start", vec3(s.uavStart)},
        {"uav_goal", vec3(s.uavGoal)},
        {"camera_heading_deg", num(s.cameraHeadingDeg)},
        {"drag_coefficient", num(s.dragCoefficient)},
        {"noise_pixels", num(s.noisePixels)},
        {"noise_depth", num(s.noiseDepth)},
        {"outlier_probability", num(s.outlierProbability)},
        {"frame_rate", num(s.frameRate)},
        {"perception_latency", num(s.perceptionLatency)},
        {"z_ground", num(s.zGround)},
        {"gravity", num(s.gravity)},
        {"sim_dt", num(s.simDt)},
        {"settle_time", num(s.settleTime)},
        {"candidate_cap",
         [&s](const TomlValue &v, const std::string &p) {
             const long long i = asInteger(v, p);
             require(i >= 1, p + ": must be >= 1");
             s.candidateCap = static_cast<std::size_t>(i);
         }},
    };
}

inline FieldMap cameraFields(CameraModel &c)
{
    return {{"fx", num(c.fx)},         {"fy", num(c.fy)},
            {"cx", num(c.cx)},         {"cy", num(c.cy)},
            {"width", integer(c.width)}, {"height", integer(c.height)},
            {"depth_min", num(c.depthMin)}, {"depth_max", num(c.depthMax)}};
}

inline FieldMap plannerFields(PlannerConfig &c)
{
    return {{"samples_per_segment", integer(c.samplesPerSegment)},
            {"safety_radius", num(c.safetyRadius)},
            {"epsilon", num(c.epsilon)},
            {"max_velocity", num(c.maxVelocity)},
            {"max_acceleration", num(c.maxAcceleration)},
            {"segments", integer(c.segments)},
            {"initial_duration", num(c.initialDuration)},
            {"replan_period", num(c.replanPeriod)},
            {"max_iterations", integer(c.maxIterations)},
            {"gradient_tolerance", num(c.gradientTolerance)},
            {"min_segment_duration", num(c.minSegmentDuration)},
            {"dodge_margin", num(c.dodgeMargin)}};
}

inline FieldMap weightFields(CostWeights &w)
{
    return {{"smoothness", num(w.smoothness)},   {"obstacle", num(w.obstacle)},
            {"time", num(w.time)},               {"feasibility", num(w.feasibility)},
            {"dodge", num(w.dodge)},             {"relative_velocity", num(w.relativeVelocity)}};
}

inline FieldMap uncertaintyFields(UncertaintyParams &u)
{
    return {{"alpha", num(u.alpha)}, {"beta", num(u.beta)}, {"gamma", num(u.gamma)}};
}

inline FieldMap splineFields(SplineConfig &c)
{
    return {{"window_length", integer(c.windowLength)},
            {"smoothing", num(c.smoothing)},
            {"eval_grid_dt", num(c.evalGridDt)}};
}

inline FieldMap detectorFields(ReleaseDetectorConfig &c) { return {{"accel_threshold", num(c.accelThreshold)}}; }

inline FieldMap depthFilterFields(DepthFilterConfig &c)
{
    return {{"window_half_size", integer(c.windowHalfSize)},
            {"outlier_k", num(c.outlierK)},
            {"min_valid_fraction", num(c.minValidFraction)},
            {"temporal_jump_max", num(c.temporalJumpMax)}};
}

inline FieldMap trackingFields(ScenarioConfig &s)
{
    return {{"kp", num(s.trackKp)},
            {"kv", num(s.trackKv)},
            {"attitude_lag", num(s.attitudeLag)},
            {"goal_tolerance", num(s.goalTolerance)}};
}

inline FieldMap sweepFields(SweepAxes &a)
{
    auto numbers = [](std::vector<double> &dst) -> Setter {
        return [&dst](const TomlValue &v, const std::string &p) {
            require(v.kind == TomlValue::Kind::Array, p + ": expected an array of numbers");
            dst.clear();
            for (const auto &e : v.array)
                dst.push_back(asNumber(e, p));
        };
    };
    return {{"distances", numbers(a.distances)},
            {"angles_deg", numbers(a.anglesDeg)},
            {"bands",
             [&a](const TomlValue &v, const std::string &p) {
                 require(v.kind == TomlValue::Kind::Array, p + ": expected an array of band names");
                 a.bands.clear();
                 for (const auto &e : v.array)
                 {
                     require(e.kind == TomlValue::Kind::String, p + ": expected band names as strings");
                     a.bands.push_back(parseBand(e.string));
                 }
             }},
            {"trials_per_cell", integer(a.trialsPerCell)},
            {"band_half_width", num(a.bandHalfWidth)},
            {"aim_jitter_deg", num(a.aimJitterDeg)}};
}

inline FieldMap attackerFields(AttackerConfig &a)
{
    return {{"position", vec3(a.position)},
            {"release_height", num(a.releaseHeight)},
            {"release_reach", num(a.releaseReach)},
            {"throw_speed", num(a.throwSpeed)},
            {"throw_elevation_deg", num(a.throwElevationDeg)},
            {"throw_azimuth_deg", num(a.throwAzimuthDeg)},
            {"aim_at_uav", boolean(a.aimAtUav)},
            {"release_time", num(a.releaseTime)},
            {"windup_duration", num(a.arm.windupDuration)},
            {"windup_amplitude", num(a.arm.windupAmplitude)},
            {"acceleration_duration", num(a.arm.accelerationDuration)},
            {"jerk_duration", num(a.arm.jerkDuration)},
            {"release_snap", num(a.arm.releaseSnap)},
            {"follow_through_decel", num(a.arm.followThroughDecel)}};
}

inline FieldMap obstacleFields(StaticObstacle &o) { return {{"center", vec3(o.center)}, {"radius", num(o.radius)}}; }

// Shortest text that parses back to the same double.
inline std::string formatNumber(double d)
{
    if (std::isinf(d))
        return d > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), d);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eE") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string formatVec(const Vec3 &v)
{
    return "[" + formatNumber(v.x()) + ", " + formatNumber(v.y()) + ", " + formatNumber(v.z()) + "]";
}

inline std::string formatList(const std::vector<double> &v)
{
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i)
        s += (i ? ", " : "") + formatNumber(v[i]);
    return s + "]";
}

} // namespace scenario_detail

// Fields absent from the file keep their defaults. Any [[attacker]] or
// [[obstacle]] table replaces the default list. Validates the result.
inline ScenarioFile parseScenario(const std::string &text)
{
    using namespace scenario_detail;
    ScenarioFile out;
    ScenarioConfig &s = out.scenario;
    const auto tables = parseToml(text);
    std::vector<AttackerConfig> attackers;
    std::vector<StaticObstacle> obstacles;
    bool sawAttacker = false;
    for (const auto &t : tables)
    {
        if (t.name.empty())
        {
            if (!t.entries.empty())
                throw ValidationError(t.entries.front().first + ": field outside any table");
            continue;
        }
        if (t.arrayElement)
        {
            if (t.name == "attacker")
            {
                sawAttacker = true;
                AttackerConfig a;
                apply(t, attackerFields(a), "attacker[" + std::to_string(attackers.size()) + "]");
                attackers.push_back(a);
            }
            else if (t.name == "obstacle")
            {
                StaticObstacle o;
                apply(t, obstacleFields(o), "obstacle[" + std::to_string(obstacles.size()) + "]");
                obstacles.push_back(o);
            }
            else
            {
                throw ValidationError(t.name + ": unknown table array");
            }
            continue;
        }
        if (t.name == "scenario")
            apply(t, scenarioFields(s), t.name);
        else if (t.name == "camera")
            apply(t, cameraFields(s.camera), t.name);
        else if (t.name == "planner")
            apply(t, plannerFields(s.planner), t.name);
        else if (t.name == "planner.weights")
            apply(t, weightFields(s.planner.weights), t.name);
        else if (t.name == "uncertainty")
            apply(t, uncertaintyFields(s.uncertainty), t.name);
        else if (t.name == "spline")
            apply(t, splineFields(s.spline), t.name);
        else if (t.name == "detector")
            apply(t, detectorFields(s.detector), t.name);
        else if (t.name == "depth_filter")
            apply(t, depthFilterFields(s.depthFilter), t.name);
        else if (t.name == "tracking")
            apply(t, trackingFields(s), t.name);
        else if (t.name == "sweep")
            apply(t, sweepFields(out.sweep), t.name);
        else
            throw ValidationError(t.name + ": unknown table");
    }
    if (sawAttacker)
        s.attackers = attackers;
    s.obstacles = obstacles;
    s.validate();
    out.sweep.validate();
    return out;
}

inline std::string dumpScenario(const ScenarioFile &f)
{
    using namespace scenario_detail;
    const ScenarioConfig &s = f.scenario;
    std::ostringstream o;
    auto kv = [&o](const char *k, const std::string &v) { o << k << " = " << v << "\n"; };
    auto n = [&kv](const char *k, double v) { kv(k, formatNumber(v)); };
    auto i = [&kv](const char *k, long long v) { kv(k, std::to_string(v)); };

    o << "[scenario]\n";
    i("seed", static_cast<long long>(s.seed));
    kv("uav_start", formatVec(s.uavStart));
    kv("uav_goal", formatVec(s.uavGoal));
    n("camera_heading_deg", s.cameraHeadingDeg);
    n("drag_coefficient", s.dragCoefficient);
    n("noise_pixels", s.noisePixels);
    n("noise_depth", s.noiseDepth);
    n("outlier_probability", s.outlierProbability);
    n("frame_rate", s.frameRate);
    n("perception_latency", s.perceptionLatency);
    n("z_ground", s.zGround);
    n("gravity", s.gravity);
    n("sim_dt", s.simDt);
    n("settle_time", s.settleTime);
    i("candidate_cap", static_cast<long long>(s.candidateCap));

    o << "\n[camera]\n";
    n("fx", s.camera.fx);
    n("fy", s.camera.fy);
    n("cx", s.camera.cx);
    n("cy", s.camera.cy);
    i("width", s.camera.width);
    i("height", s.camera.height);
    n("depth_min", s.camera.depthMin);
    n("depth_max", s.camera.depthMax);

    const PlannerConfig &p = s.planner;
    o << "\n[planner]\n";
    i("samples_per_segment", p.samplesPerSegment);
    n("safety_radius", p.safetyRadius);
    n("epsilon", p.epsilon);
    n("max_velocity", p.maxVelocity);
    n("max_acceleration", p.maxAcceleration);
    i("segments", p.segments);
    n("initial_duration", p.initialDuration);
    n("replan_period", p.replanPeriod);
    i("max_iterations", p.maxIterations);
    n("gradient_tolerance", p.gradientTolerance);
    n("min_segment_duration", p.minSegmentDuration);
    n("dodge_margin", p.dodgeMargin);

    o << "\n[planner.weights]\n";
    n("smoothness", p.weights.smoothness);
    n("obstacle", p.weights.obstacle);
    n("time", p.weights.time);
    n("feasibility", p.weights.feasibility);
    n("dodge", p.weights.dodge);
    n("relative_velocity", p.weights.relativeVelocity);

    o << "\n[uncertainty]\n";
    n("alpha", s.uncertainty.alpha);
    n("beta", s.uncertainty.beta);
    n("gamma", s.uncertainty.gamma);

    o << "\n[spline]\n";
    i("window_length", s.spline.windowLength);
    n("smoothing", s.spline.smoothing);
    n("eval_grid_dt", s.spline.evalGridDt);

    o << "\n[detector]\n";
    n("accel_threshold", s.detector.accelThreshold);

    o << "\n[depth_filter]\n";
    i("window_half_size", s.depthFilter.windowHalfSize);
    n("outlier_k", s.depthFilter.outlierK);
    n("min_valid_fraction", s.depthFilter.minValidFraction);
    n("temporal_jump_max", s.depthFilter.temporalJumpMax);

    o << "\n[tracking]\n";
    n("kp", s.trackKp);
    n("kv", s.trackKv);
    n("attitude_lag", s.attitudeLag);
    n("goal_tolerance", s.goalTolerance);

    const SweepAxes &a = f.sweep;
    o << "\n[sweep]\n";
    kv("distances", formatList(a.distances));
    kv("angles_deg", formatList(a.anglesDeg));
    std::string bands = "[";
    for (std::size_t b = 0; b < a.bands.size(); ++b)
        bands += std::string(b ? ", " : "") + "\"" + bandName(a.bands[b]) + "\"";
    kv("bands", bands + "]");
    i("trials_per_cell", a.trialsPerCell);
    n("band_half_width", a.bandHalfWidth);
    n("aim_jitter_deg", a.aimJitterDeg);

    for (const auto &at : s.attackers)
    {
        o << "\n[[attacker]]\n";
        kv("position", formatVec(at.position));
        n("release_height", at.releaseHeight);
        n("release_reach", at.releaseReach);
        n("throw_speed", at.throwSpeed);
        n("throw_elevation_deg", at.throwElevationDeg);
        n("throw_azimuth_deg", at.throwAzimuthDeg);
        kv("aim_at_uav", at.aimAtUav ? "true" : "false");
        n("release_time", at.releaseTime);
        n("windup_duration", at.arm.windupDuration);
        n("windup_amplitude", at.arm.windupAmplitude);
        n("acceleration_duration", at.arm.accelerationDuration);
        n("jerk_duration", at.arm.jerkDuration);
        n("release_snap", at.arm.releaseSnap);
        n("follow_through_decel", at.arm.followThroughDecel);
    }
    for (const auto &ob : s.obstacles)
    {
        o << "\n[[obstacle]]\n";
        kv("center", formatVec(ob.center));
        n("radius", ob.radius);
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// Files

inline std::string readFile(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), path.string() + ": cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ScenarioFile loadScenario(const std::filesystem::path &path) { return parseScenario(readFile(path)); }

// Writes to a sibling temporary, then renames over the destination.
inline void writeFileAtomic(const std::filesystem::path &path, const std::string &content)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error(tmp.string() + ": cannot open for writing");
        out << content;
        out.flush();
        if (!out)
            throw std::runtime_error(tmp.string() + ": write failed");
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec)
    {
        std::filesystem::remove(tmp);
        throw std::runtime_error(path.string() + ": rename failed: " + ec.message());
    }
}

// ---------------------------------------------------------------------------
// Metrics (JSON lines)

using Json = nlohmann::ordered_json;

inline Json jsonNumber(double d)
{
    if (!std::isfinite(d))
        return nullptr;
    return d;
}

inline double numberFromJson(const Json &j)
{
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

inline Json trialRecordJson(const TrialRecord &r)
{
    const TrialResult &t = r.result;
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["strategy"] = strategyName(r.strategy);
    j["cell"] = r.cell.index;
    j["distance"] = r.cell.distance;
    j["angle_deg"] = r.cell.angleDeg;
    j["band"] = bandName(r.cell.band);
    j["trial"] = r.trial;
    j["seed"] = r.seed;
    j["throw_speed"] = r.speed;
    j["d_min"] = jsonNumber(t.dMin);
    j["success"] = t.success;
    j["detection_time"] = jsonNumber(t.detectionTime);
    j["first_plan_time"] = jsonNumber(t.firstPlanTime);
    j["release_time"] = jsonNumber(t.releaseTime);
    j["landing_time"] = jsonNumber(t.landingTime);
    j["goal_reached"] = t.goalReached;
    j["candidate_count"] = t.candidateCount;
    j["replan_count"] = t.replanCount;
    j["dodge_plan_count"] = t.dodgePlanCount;
    j["clear_plan_achieved"] = t.clearPlanAchieved;
    j["descent_monotone"] = t.descentMonotone;
    Json tl = Json::array();
    for (const auto &e : t.timeline)
        tl.push_back({{"t", jsonNumber(e.time)}, {"tag", e.tag}});
    j["timeline"] = std::move(tl);
    return j;
}

inline Json cellSummaryJson(const CellReport &c)
{
    Json j;
    j["cell"] = c.cell.index;
    j["distance"] = c.cell.distance;
    j["angle_deg"] = c.cell.angleDeg;
    j["band"] = bandName(c.cell.band);
    j["trials"] = c.trials;
    j["successes"] = c.successes;
    j["success_rate"] = jsonNumber(c.successRate);
    j["mean_d_min"] = jsonNumber(c.meanDmin);
    return j;
}

inline Json reportSummaryJson(const MonteCarloReport &r)
{
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["strategy"] = strategyName(r.strategy);
    j["trials"] = r.trials;
    j["successes"] = r.successes;
    j["success_rate"] = jsonNumber(r.successRate);
    j["mean_d_min"] = jsonNumber(r.meanDmin);
    Json cells = Json::array();
    for (const auto &c : r.cells)
        cells.push_back(cellSummaryJson(c));
    j["cells"] = std::move(cells);
    return j;
}

// One line per trial in (cell, trial) order.
inline std::string metricsJsonLines(const MonteCarloReport &r)
{
    std::string out;
    for (const auto &rec : r.records)
        out += trialRecordJson(rec).dump() + "\n";
    return out;
}

inline std::string cycleJsonLines(const std::vector<CycleRecord> &cycles)
{
    std::string out;
    for (const auto &c : cycles)
    {
        const CostReport &r = c.report;
        Json j;
        j["schema_version"] = kSchemaVersion;
        j["t"] = c.time;
        j["plan_id"] = c.planId;
        j["dodge_mode"] = c.dodgeMode;
        j["threat_count"] = c.threatCount;
        j["published_j_d"] = jsonNumber(c.publishedDodge);
        j["j_s"] = jsonNumber(r.smoothness);
        j["j_o"] = jsonNumber(r.obstacle);
        j["j_t"] = jsonNumber(r.time);
        j["j_f"] = jsonNumber(r.feasibility);
        j["j_d"] = jsonNumber(r.dodge);
        j["j_v"] = jsonNumber(r.relativeVelocity);
        j["total"] = jsonNumber(r.total);
        j["grad_norm_q"] = jsonNumber(r.gradNormQ);
        j["grad_norm_t"] = jsonNumber(r.gradNormT);
        j["iterations"] = r.iterations;
        j["failed"] = r.failed;
        out += j.dump() + "\n";
    }
    return out;
}

// Published plans: per segment, the duration and 18 coefficients
// (x, y, z blocks, ascending powers of local time).
inline std::string planJsonLines(const std::vector<PublishedPlan> &plans)
{
    std::string out;
    for (const auto &p : plans)
    {
        Json j;
        j["schema_version"] = kSchemaVersion;
        j["plan_id"] = p.planId;
        j["start"] = p.start;
        Json segs = Json::array();
        const auto &c = p.trajectory.coefficients();
        for (int i = 0; i < p.trajectory.segments(); ++i)
        {
            Json coeffs = Json::array();
            for (int axis = 0; axis < 3; ++axis)
                for (int n = 0; n < 6; ++n)
                    coeffs.push_back(c(6 * i + n, axis));
            segs.push_back({{"duration", p.trajectory.durations()(i)}, {"coefficients", std::move(coeffs)}});
        }
        j["segments"] = std::move(segs);
        out += j.dump() + "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Trajectory CSV

inline std::string trajectoryCsv(const std::vector<TrajectoryLogRow> &rows)
{
    std::ostringstream o;
    o.precision(17);
    o << "t,uav_x,uav_y,uav_z,projectile_x,projectile_y,projectile_z,plan_id,surviving_count,R_of_nearest\n";
    auto cell = [&o](double d) {
        if (std::isfinite(d))
            o << d;
        else
            o << "nan";
    };
    for (const auto &r : rows)
    {
        cell(r.t);
        for (int k = 0; k < 3; ++k)
        {
            o << ',';
            cell(r.uav[k]);
        }
        for (int k = 0; k < 3; ++k)
        {
            o << ',';
            cell(r.projectile[k]);
        }
        o << ',' << r.planId << ',' << r.survivingCount << ',';
        cell(r.nearestRadius);
        o << '\n';
    }
    return o.str();
}

// ---------------------------------------------------------------------------
// Keypoint record / replay (JSON lines, one frame per line)

inline std::string keypointStreamJsonLines(const std::vector<KeypointStream> &streams)
{
    std::string out;
    for (const auto &s : streams)
    {
        for (const auto &f : s.frames)
        {
            Json j;
            j["schema_version"] = kSchemaVersion;
            j["attacker"] = s.attacker;
            j["joint"] = jointName(s.joint);
            j["valid"] = f.valid;
            j["delivery_time"] = f.deliveryTime;
            j["timestamp"] = f.observation.timestamp;
            j["u"] = jsonNumber(f.observation.u);
            j["v"] = jsonNumber(f.observation.v);
            Json patch = Json::array();
            for (double d : f.observation.depthPatch)
                patch.push_back(jsonNumber(d));
            j["depth_patch"] = std::move(patch);
            out += j.dump() + "\n";
        }
    }
    return out;
}

inline std::vector<KeypointStream> parseKeypointStream(const std::string &text)
{
    std::vector<KeypointStream> streams;
    std::istringstream in(text);
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line))
    {
        ++lineNo;
        if (toml_detail::trim(line).empty())
            continue;
        const std::string where = "keypoints line " + std::to_string(lineNo);
        Json j;
        try
        {
            j = Json::parse(line);
            require(j.value("schema_version", 0) == kSchemaVersion, where + ": unsupported schema_version");
            const int attacker = j.at("attacker").get<int>();
            const std::string jn = j.at("joint").get<std::string>();
            require(jn == "right_wrist" || jn == "left_wrist", where + ": unknown joint '" + jn + "'");
            const JointId joint = jn == "right_wrist" ? JointId::RightWrist : JointId::LeftWrist;
            StreamFrame f;
            f.valid = j.at("valid").get<bool>();
            f.deliveryTime = j.at("delivery_time").get<double>();
            f.observation.timestamp = j.at("timestamp").get<double>();
            f.observation.u = numberFromJson(j.at("u"));
            f.observation.v = numberFromJson(j.at("v"));
            f.observation.joint = joint;
            for (const auto &d : j.at("depth_patch"))
                f.observation.depthPatch.push_back(numberFromJson(d));
            auto it = std::find_if(streams.begin(), streams.end(), [&](const KeypointStream &s) {
                return s.attacker == attacker && s.joint == joint;
            });
            if (it == streams.end())
            {
                streams.push_back({joint, attacker, {}});
                it = streams.end() - 1;
            }
            it->frames.push_back(std::move(f));
        }
        catch (const nlohmann::json::exception &e)
        {
            throw ValidationError(where + ": " + e.what());
        }
    }
    return streams;
}

} // namespace dodge
