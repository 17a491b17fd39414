# Panel data model, ingestion and sample construction
from .quarters import quarter_ordinal, quarter_label, quarter_range, quarter_sequence, quarter_position
from .dataset import PanelDataset, SampleFilter, OUTCOMES, DEFAULT_CONTROLS
from .keywords import (KeywordDictionary, count_mentions, count_by_category, parse_keywords,
                       load_keywords, default_keywords, mentions_from_corpus)
from .treatment import TreatmentAssignment, build_treatment, build_treatment_for_quarters
from .ingest import PanelSchema, ingest_panel, write_panel, compute_returns, canonical_schema, infer_schema
from .transforms import (winsorize, winsorize_panel, apply_filter, size_split, impute_within_entity,
                         complete_entities, summary_statistics, treatment_groups)
