def quick_reference():
    return """QUICK REFERENCE - Valid Config Values:

┌──────────────────┬─────────────────────────────────────────────────────┐
│ Field            │ Valid Values                                        │
├──────────────────┼─────────────────────────────────────────────────────┤
│ geometry         │ grating_case1, grating_case2, waveguide             │
│ polarization     │ TE, TM (gratings), acoustic (wave guides)           │
│ alpha            │ 0 <= alpha < 1 (wave guides: 0)                     │
│ medium.kind      │ uniform, bump, layer, sinusoidal, profile_x2,       │
│                  │ samples                                             │
│ conductors.kind  │ disk, rectangle, band                               │
│ c0.kind          │ constant, sine-perturbed, samples                   │
│ kind             │ forward_sweep, flux_audit, lemma1_audit,            │
│                  │ dtn_compare, continuation_audit, time_synthesis,    │
│                  │ embedded_eigen_probe                                │
│ k_grid           │ {"values": [...]} or {"start", "stop", "count"}     │
└──────────────────┴─────────────────────────────────────────────────────┘

DEFAULTS: margin 2 (T' = T + 2), n1 64, h2 0.1, M = propagating + 8, seed 0

Example: "Check energy balance of the smooth bump at k = 1.5"
→ scenario: scenario://smooth_eps
→ kind: flux_audit
→ k_grid: {"values": [1.5]}"""
