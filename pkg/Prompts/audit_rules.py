def audit_rules():
    return """Audit Rules:

    1. THRESHOLDS: no solve runs with |k| inside the guard band of a threshold |m+alpha| (gratings)
       or of mu_m(k) = 0 (wave guides). Shift k instead of shrinking the guard band.
    2. FLUX: lossless scenarios must balance incident and outgoing flux (residual <= flux tolerance).
       The residual should shrink about four times when h is halved.
    3. RECIPROCITY: needs 2*alpha to be an integer; compares S with its mirrored transpose.
    4. TRACE IDENTITY: the cutoff annulus needs T' >= T + width + h; otherwise MarginError.
    5. DTN: distorted-wave traces must span the trace basis (span residual <= span tolerance).
    6. CONTINUATION: samples stay in one threshold band; evaluation stays within 25% of the window.
    7. TIME SYNTHESIS: the input spectrum must lie inside the DtN family range (BandCoverageError).
    8. EXIT CODES: audit failure 3, library errors 10-61 (see the error field), anything else 1.

    Never loosen a tolerance to make a run pass; report the failing audit and its value."""
