"""
Threat scenarios
================

Replay the five scripted attacks and print each expectation with the
transcript of the most involved one.
"""

from trustengine.scenarios import run_all

reports = run_all()
for report in reports:
    status = "ok" if report.passed else "FAILED"
    print(f"{report.name:24s} {status} ({len(report.expectations)} checks)")

# the privilege escalation story, step by step
story = next(r for r in reports if r.name == "privilege-escalation")
print()
print("\n".join(story.transcript))
