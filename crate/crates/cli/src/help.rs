//! Long help text: the run configuration keys and every input file format.

use microsim::pipeline::CONFIG_REFERENCE;

pub fn after_help() -> String {
    format!(
        "\
EXIT CODES
  0 success, 1 validation failure, 2 configuration or input error,
  3 non-convergence with --strict, 4 runtime error

RUN CONFIGURATION (simulate --config FILE, TOML)
Relative paths are resolved against the directory of the config file and
must exist. Unknown keys are rejected.

{CONFIG_REFERENCE}
Event names: ageing, birth, death, marriage, divorce, cohabitation, breakup,
leave_home, emigration, immigration, socioeconomic. event_order must be a
permutation of the enabled events. Emigration and immigration do nothing
unless their input files are configured.

{FORMATS}"
    )
}

const FORMATS: &str = "\
FILE FORMATS (CSV with a header row; lines starting with # are ignored
where noted)

Population snapshot (directory)
  persons.csv     id, age, sex, marital_status, employment, education,
                  student_status, partner_id, mother_id, father_id,
                  household_id, migrant_flag (empty when absent)
  households.csv  id, member_count
  Codes: sex male|female; marital_status not_applicable|never_married|
  married|separated|divorced|widowed; employment not_applicable|employed|
  unemployed|not_in_labour_force; education not_applicable|
  year_12_or_below|certificate|advanced_diploma_diploma|bachelor_degree|
  graduate_diploma_certificate|postgraduate_degree; student_status
  not_applicable|part_time|full_time; migrant_flag inter_regional|
  overseas_temporary|overseas_permanent.

targets.csv       year, bin, count
  bin is the household size 1..n_bins; the top bin may be written n+.
  Every year lists every bin; years without rows reuse the latest earlier
  year.

models_dir        <sub_model>.csv with group, term, estimate (logistic);
                  multinomial/<name>.csv with outcome rows in the group
                  column, the first outcome all zero. Files override the
                  built-in models of the same name.
rates_dir         <table>.csv: key columns then probability
                  (mortality: age_band, sex, probability).

migration_schedule.csv  year, type, direction, persons, conv_rate
  type inter_regional|overseas_temporary|overseas_permanent; direction
  in|out. Immigration draws round(persons * conv_rate) households.
emigration_target.csv   year, age_band, sex, count
  age_band 00-04 ... 85+.
migrant pool (directory)  a population snapshot plus weights.csv with
  household_id, weight, migrant_type.

synth --sample FILE     household_id, weight (optional), relationship, age,
  sex, marital_status, employment, education, student_status
  relationship reference|spouse|partner|child|parent|grandchild|
  other_relative|unrelated.
synth --controls DIR    one CSV per constraint: dimension columns then
  target. Dimensions age_band, age_group (child|adult), sex,
  marital_status, employment, education, student_status, household_size
  (k or k+, household-level, not combined with person dimensions).

align --problem FILE    kind, bin, count (# comments allowed)
  kind unallocated|existing_bins|target, bin 1..n.

report --observed DIR   a population snapshot and/or <dimension>.csv
  tables with category, count. Dimensions age_band, sex, marital_status,
  education, employment, household_size, household_type.

OUTPUTS
  simulate: <out>/run_<seed>/year_<y>/{persons.csv, households.csv,
  metrics.csv}, run_<seed>/{occurrences.csv, alignment_trace.csv,
  notes.csv}, <out>/summary.csv, <out>/reports/.
  synth: persons.csv, households.csv, weights.csv, ipu_diagnostics.csv.
  align: alignment.csv, alignment_trace.csv, alignment.md.
  report: reports/{marginals.csv, household_types.csv,
  household_size_fit.csv, alignment.csv, alignment_trace.csv, summary.md}.
";
