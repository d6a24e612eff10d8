"""Evaluator-facing instructions, shipped with task exports and served by the API."""

INSTRUCTIONS_TEXT = """\
# Evaluator instructions

Each task asks you to read one clinical report together with a set of short
descriptions of it, and to quantify how many "medical facts" each
description reports correctly.

There is no fixed definition of a medical fact. Use your clinical judgment,
and apply the same granularity throughout. Two worked examples:

Description:

    2-year-old female who comes in for just rechecking her weight, her
    breathing status, and her diet.

counts as (arguably) 4 facts:

  - 2 year old female
  - coming to recheck her weight
  - coming to recheck her breathing status
  - coming to recheck her diet

Description:

    The patient had a syncopal episode last night. She did not have any
    residual deficit. She had a headache at that time. She denies chest
    pains or palpitations.

counts as (arguably) 5 facts:

  - had a syncopal episode last night
  - no residual deficit
  - headache
  - no chest pains
  - no palpitations

For each task:

 1. Read the clinical report.
 2. Read the reference description and count its facts (R).
 3. For each candidate description, count:
      - the facts it contains (G),
      - the facts it shares with the reference (R&G),
      - the facts that are correct, using the clinical report as the
        ground truth (C).
 4. Rate each candidate's coherence: Coherent, Minor Errors, or Major
    Errors. Coherence asks only whether the text is grammatically correct
    and fluent, regardless of factual correctness.

You may optionally highlight the fact spans in the text as you count; the
highlights are stored for audit but do not change any score.
"""
