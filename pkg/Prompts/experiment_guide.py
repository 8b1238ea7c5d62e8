def experiment_guide():
    return """Experiment Guide - running modescatter:

    1. PICK A SCENARIO: start from a bundled one (scenario://list) or write your own JSON
    - geometry: grating_case1 (open above and below), grating_case2 (wall at x2=-R), waveguide
    - polarization: TE or TM for gratings, acoustic for wave guides
    - T, margin and R must be multiples of resolution.h2; contrast must vanish for |x2| >= T

    2. PICK AN EXPERIMENT KIND:
    - forward_sweep: amplitudes of every propagating incident mode over a k grid
    - flux_audit: energy balance and reciprocity of the reflection matrix
    - lemma1_audit: trace identity between line sources and distorted waves
    - dtn_compare: direct DtN map against the map rebuilt from distorted waves
    - continuation_audit: rational fit of one amplitude, checked at an evaluation point
    - time_synthesis: frequency synthesis of the time-domain normal derivative against leapfrog
    - embedded_eigen_probe: condition estimate near an embedded eigenvalue

    3. VALIDATE FIRST: validate_experiment(config_path) fills defaults and refuses k values
       inside a threshold guard band, suggesting shifted values.
       A continuation target must lie within 25% of the window width of the k grid and
       on the same side of every threshold as the samples.

    4. RUN: run_experiment(config_path, out) writes config, metrics, data, gnuplot scripts and a
       manifest with sha256 hashes. Check metrics.json "passed" and each audit entry.

    Always read scenario://tolerances before judging an audit."""
