// End-to-end library walkthrough on synthetic captures:
// capture -> labelled packets -> window features -> elimination -> GA -> evaluation.

#include <cstdio>
#include <iostream>
#include <memory>

#include "iotgem/iotgem.hpp"

using namespace iotgem;

namespace {

FeatureTable table_for(std::uint64_t seed, DataRole role) {
    synth::CaptureConfig cfg;
    cfg.seed = seed;
    cfg.packets = 2000;
    const auto capture = parse_pcap(synth::make_capture(cfg));
    const auto packets = apply_rules(capture.packets, parse_rules(synth::attack_rules()), Label::benign);
    auto table = extract_table(packets).table;
    table.role = role;
    return table;
}

}  // namespace

int main() {
    const auto train = table_for(1, DataRole::train_cv);
    const auto hpo = table_for(2, DataRole::hpo);
    const auto validation = table_for(3, DataRole::validation);
    const auto test = table_for(4, DataRole::dataset_test);
    std::printf("extracted %zu rows x %zu columns per capture\n", train.rows(), train.cols());

    const auto probe = eval::probe_single_feature("pck_size", train, test);
    std::printf("probe pck_size: F1 %.3f, kappa %.3f (chance F1 %.3f)\n", probe.bundle.f1, probe.bundle.kappa, probe.chance_f1);

    const auto elim = select::eliminate(train, hpo, validation);
    std::printf("elimination kept %zu of %zu voted features\n", elim.survivors.size(), elim.votes.size());

    select::GAConfig ga;
    ga.generations = 10;
    const auto sel = select::ga_select(elim.survivors, train, validation, ga);
    std::printf("GA picked %zu features, VALIDATION F1 %.3f\n", sel.features.size(), sel.fitness);

    const std::vector<TaggedTable> tables{{DataRole::train_cv, "train", std::make_shared<const FeatureTable>(train)},
                                          {DataRole::dataset_test, "test", std::make_shared<const FeatureTable>(test)}};
    const auto reports = eval::evaluate("synthetic flood", {ml::ClassifierSpec::decision_tree(0, 0), ml::ClassifierSpec::gaussian_nb()},
                                        sel.features, tables);
    eval::write_table_markdown(reports, std::cout);
    return 0;
}
