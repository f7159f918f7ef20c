#include "dodge/gradcheck.hpp"
#include "dodge/io.hpp"
#include "dodge/sim.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace dodge;

namespace
{

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitFault = 2;

struct Common
{
    std::string scenarioPath;
    std::string outDir;
    std::optional<std::uint64_t> seed;
    int jobs = 1;
    std::optional<int> trials;
    std::string strategy = "full";
    int verbosity = 0;
    bool quiet = false;
};

// Flag beats environment beats the built-in default.
fs::path outputDir(const Common &c)
{
    if (!c.outDir.empty())
        return c.outDir;
    if (const char *env = std::getenv("DODGE_OUT_DIR"); env && *env)
        return env;
    return "dodge_out";
}

ScenarioFile loadInputs(const Common &c)
{
    ScenarioFile f;
    if (!c.scenarioPath.empty())
    {
        require(fs::is_regular_file(c.scenarioPath), "--scenario: file not found: " + c.scenarioPath);
        f = loadScenario(c.scenarioPath);
    }
    if (c.seed)
        f.scenario.seed = *c.seed;
    if (c.trials)
    {
        require(*c.trials >= 1, "--trials: must be >= 1");
        f.sweep.trialsPerCell = *c.trials;
    }
    require(c.jobs >= 1, "--jobs: must be >= 1");
    f.scenario.validate();
    f.sweep.validate();
    return f;
}

Strategy strategyOf(const Common &c)
{
    const auto s = parseStrategy(c.strategy);
    require(s.has_value(), "--strategy: expected full, no_temporal or no_spatial");
    return *s;
}

std::string fmt(double v, int prec = 3)
{
    if (!std::isfinite(v))
        return "n/a";
    std::ostringstream o;
    o.setf(std::ios::fixed);
    o.precision(prec);
    o << v;
    return o.str();
}

std::string trialSummary(const TrialResult &r, Strategy s)
{
    std::ostringstream o;
    o << "strategy: " << strategyName(s) << "\n"
      << "success=" << (r.success ? "true" : "false") << "\n"
      << "d_min: " << fmt(r.dMin) << " m\n"
      << "detection_time: " << fmt(r.detectionTime) << " s\n"
      << "first_plan_time: " << fmt(r.firstPlanTime) << " s\n"
      << "release_time: " << fmt(r.releaseTime) << " s\n"
      << "landing_time: " << fmt(r.landingTime) << " s\n"
      << "goal_reached: " << (r.goalReached ? "true" : "false") << "\n"
      << "candidates: " << r.candidateCount << ", plans: " << r.replanCount << " (" << r.dodgePlanCount
      << " in dodge mode)\n"
      << "timeline:\n";
    for (const auto &e : r.timeline)
        o << "  " << fmt(e.time) << "  " << e.tag << "\n";
    return o.str();
}

std::string reportSummary(const MonteCarloReport &r)
{
    std::ostringstream o;
    o << "strategy: " << strategyName(r.strategy) << "  trials: " << r.trials << "  SR: " << fmt(r.successRate, 2)
      << "%  mean d_min: " << fmt(r.meanDmin) << " m\n";
    o << "  dist(m)  angle(deg)  band      trials  SR(%)   mean d_min(m)\n";
    for (const auto &c : r.cells)
    {
        char line[160];
        std::snprintf(line, sizeof line, "  %-7s  %-10s  %-8s  %6d  %6.2f  %s\n", fmt(c.cell.distance, 2).c_str(),
                      fmt(c.cell.angleDeg, 1).c_str(), bandName(c.cell.band), c.trials, c.successRate,
                      fmt(c.meanDmin).c_str());
        o << line;
    }
    return o.str();
}

int cmdRun(const Common &c, const std::string &replayPath, bool record, bool freeze)
{
    const ScenarioFile f = loadInputs(c);
    const Strategy strategy = strategyOf(c);
    const fs::path out = outputDir(c);

    std::vector<KeypointStream> replay;
    TrialOptions opts;
    if (!replayPath.empty())
    {
        require(fs::is_regular_file(replayPath), "--replay: file not found: " + replayPath);
        replay = parseKeypointStream(readFile(replayPath));
        opts.replay = &replay;
    }
    std::vector<TrajectoryLogRow> log;
    std::vector<CycleRecord> cycles;
    std::vector<PublishedPlan> plans;
    opts.log = &log;
    opts.cycles = &cycles;
    opts.plans = &plans;
    opts.freezePlanner = freeze;
    const TrialResult res = runTrial(f.scenario, strategy, opts);

    TrialRecord rec;
    rec.seed = f.scenario.seed;
    rec.strategy = strategy;
    rec.speed = f.scenario.attackers.front().throwSpeed;
    rec.result = res;
    writeFileAtomic(out / "metrics.jsonl", trialRecordJson(rec).dump() + "\n");
    writeFileAtomic(out / "cycles.jsonl", cycleJsonLines(cycles));
    writeFileAtomic(out / "plans.jsonl", planJsonLines(plans));
    writeFileAtomic(out / "trajectory.csv", trajectoryCsv(log));
    if (record)
    {
        const double tEnd = res.landingTime + f.scenario.settleTime;
        writeFileAtomic(out / "keypoints.jsonl", keypointStreamJsonLines(generateKeypointStream(f.scenario, tEnd)));
    }
    const std::string summary = trialSummary(res, strategy);
    writeFileAtomic(out / "summary.txt", summary);
    if (!c.quiet)
        std::cout << summary;
    if (c.verbosity > 0)
        std::cerr << "wrote " << out.string() << "\n";
    return kExitOk;
}

int cmdMonteCarlo(const Common &c)
{
    const ScenarioFile f = loadInputs(c);
    const Strategy strategy = strategyOf(c);
    const fs::path out = outputDir(c);
    const MonteCarloReport rep = runMonteCarlo(f.scenario, f.sweep, strategy, c.jobs);
    writeFileAtomic(out / "metrics.jsonl", metricsJsonLines(rep));
    writeFileAtomic(out / "summary.json", reportSummaryJson(rep).dump(2) + "\n");
    const std::string summary = reportSummary(rep);
    writeFileAtomic(out / "summary.txt", summary);
    if (!c.quiet)
        std::cout << summary;
    return kExitOk;
}

int cmdAblate(const Common &c)
{
    const ScenarioFile f = loadInputs(c);
    const fs::path out = outputDir(c);
    std::ostringstream table;
    table << "strategy      trials  SR(%)    mean d_min(m)\n";
    Json all = Json::array();
    for (Strategy s : {Strategy::NoTemporal, Strategy::NoSpatial, Strategy::Full})
    {
        const MonteCarloReport rep = runMonteCarlo(f.scenario, f.sweep, s, c.jobs);
        writeFileAtomic(out / ("metrics_" + std::string(strategyName(s)) + ".jsonl"), metricsJsonLines(rep));
        all.push_back(reportSummaryJson(rep));
        char line[128];
        std::snprintf(line, sizeof line, "%-12s  %6d  %6.2f   %s\n", strategyName(s), rep.trials, rep.successRate,
                      fmt(rep.meanDmin).c_str());
        table << line;
        if (c.verbosity > 0)
            std::cerr << reportSummary(rep);
    }
    writeFileAtomic(out / "ablation.json", all.dump(2) + "\n");
    writeFileAtomic(out / "ablation.txt", table.str());
    if (!c.quiet)
        std::cout << table.str();
    return kExitOk;
}

int cmdGradcheck(const Common &c, int instances)
{
    require(instances >= 1, "--instances: must be >= 1");
    const std::uint64_t seed = c.seed.value_or(1);
    const GradientCheckSummary s = runGradientCheck(instances, seed);
    constexpr double tol = 1e-5;
    if (!c.quiet)
    {
        std::cout << "term    max rel. error   active/instances\n";
        for (std::size_t k = 0; k < kGradientTermNames.size(); ++k)
        {
            char line[96];
            std::snprintf(line, sizeof line, "%-6s  %.3e        %d/%d\n", kGradientTermNames[k], s.maxError[k],
                          s.active[k], s.instances);
            std::cout << line;
        }
        std::cout << (s.passed(tol) ? "PASS" : "FAIL") << " (tolerance " << tol << ")\n";
    }
    return s.passed(tol) ? kExitOk : kExitFault;
}

int cmdCalibrate(const Common &c, double target)
{
    require(target > 0.0 && target <= 1.0, "--target: must be in (0,1]");
    ScenarioFile f = loadInputs(c);
    const int count = c.trials.value_or(200);
    CalibrationOptions opt;
    opt.targetFraction = target;
    const auto batch = throwBatch(f.scenario, f.sweep, f.scenario.seed, count);
    const CalibrationResult r = calibrateUncertainty(batch, opt, c.jobs);
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["target"] = target;
    j["alpha"] = r.params.alpha;
    j["beta"] = r.params.beta;
    j["gamma"] = r.params.gamma;
    j["achieved_fraction"] = r.achievedFraction;
    j["target_reached"] = r.targetReached;
    j["trials"] = r.trials;
    j["detected"] = r.detected;
    writeFileAtomic(outputDir(c) / "calibration.json", j.dump(2) + "\n");
    if (!c.quiet)
    {
        std::cout << "alpha=" << r.params.alpha << " beta=" << r.params.beta << " gamma=" << r.params.gamma << "\n"
                  << "containment " << fmt(r.achievedFraction, 4) << " over " << r.detected << "/" << r.trials
                  << " detected throws" << (r.targetReached ? "" : " (target not reached on the grid)") << "\n";
    }
    return kExitOk;
}

int cmdDumpDefaults(const std::string &path)
{
    const std::string text = dumpScenario(ScenarioFile{});
    if (path.empty())
        std::cout << text;
    else
        writeFileAtomic(path, text);
    return kExitOk;
}

void addCommon(CLI::App *sub, Common &c, bool withStrategy)
{
    sub->add_option("--scenario", c.scenarioPath, "Scenario file (defaults built in when omitted)");
    sub->add_option("--out", c.outDir, "Output directory (env DODGE_OUT_DIR, else ./dodge_out)");
    sub->add_option("--seed", c.seed, "Master seed override");
    sub->add_option("--jobs", c.jobs, "Parallel trials");
    sub->add_option("--trials", c.trials, "Trials per cell");
    if (withStrategy)
        sub->add_option("--strategy", c.strategy, "full | no_temporal | no_spatial");
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Projectile dodging planner: simulation, sweeps and checks"};
    app.require_subcommand(1);
    app.fallthrough();
    Common common;
    app.add_flag("-v,--verbose", common.verbosity, "More diagnostics on stderr");
    app.add_flag("-q,--quiet", common.quiet, "No summary on stdout");

    std::string replayPath;
    bool record = false;
    bool freeze = false;
    auto *run = app.add_subcommand("run", "Run one closed-loop trial");
    addCommon(run, common, true);
    run->add_option("--replay", replayPath, "Keypoint JSON-lines to replay instead of synthesizing");
    run->add_flag("--record", record, "Also write the synthesized keypoint stream");
    run->add_flag("--freeze", freeze, "Never replan after the initial hover plan");

    auto *mc = app.add_subcommand("montecarlo", "Sweep the scenario grid");
    addCommon(mc, common, true);

    auto *ablate = app.add_subcommand("ablate", "Compare strategies on identical seeds");
    addCommon(ablate, common, false);

    int instances = 100;
    auto *grad = app.add_subcommand("gradcheck", "Finite-difference check of every cost gradient");
    grad->add_option("--seed", common.seed, "Instance seed");
    grad->add_option("--instances", instances, "Random instances");

    double target = 0.99;
    auto *cal = app.add_subcommand("calibrate", "Fit envelope parameters on a seeded throw batch");
    addCommon(cal, common, false);
    cal->add_option("--target", target, "Containment fraction");

    std::string dumpPath;
    auto *dump = app.add_subcommand("dump-defaults", "Print the default scenario file");
    dump->add_option("--out", dumpPath, "Write to this file instead of stdout");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::CallForAllHelp &e)
    {
        return app.exit(e);
    }
    catch (const CLI::ParseError &e)
    {
        app.exit(e);
        return kExitValidation;
    }

    try
    {
        if (*run)
            return cmdRun(common, replayPath, record, freeze);
        if (*mc)
            return cmdMonteCarlo(common);
        if (*ablate)
            return cmdAblate(common);
        if (*grad)
            return cmdGradcheck(common, instances);
        if (*cal)
            return cmdCalibrate(common, target);
        if (*dump)
            return cmdDumpDefaults(dumpPath);
    }
    catch (const ValidationError &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    catch (const std::exception &e)
    {
        std::cerr << "internal error: " << e.what() << "\n";
        return kExitFault;
    }
    return kExitFault;
}
