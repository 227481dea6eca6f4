"""
File formats: the HADC binary container for cubes, masks and score
heatmaps, CSV results, ROC samples and throughput tables, the XLSX results
workbook, and a band-interleaved raw importer.

Container layout (all little-endian):

    magic     4s   b'HADC'
    version   u16  1
    lines     u32
    pixels    u32
    bands     u32
    dtype     u8   1 = float32, 2 = uint8
    layout    u8   1 = line-major, then pixel, then band
    name_len  u16
    name      name_len bytes of UTF-8
    payload   lines * pixels * bands values
"""
import csv
import json
import logging
import math
import platform
import struct
from dataclasses import asdict, is_dataclass
from pathlib import Path

import numpy as np
from openpyxl import Workbook
from openpyxl.styles import Font, PatternFill

from .core import FLIPPED, DataCube, GroundTruthMask
from .exceptions import DataFormatError, ShapeMismatchError
from .metrics import aggregate_records

logger = logging.getLogger(__name__)

MAGIC = b'HADC'
VERSION = 1
HEADER = struct.Struct('<4sHIIIBBH')
DTYPE_FLOAT32 = 1
DTYPE_UINT8 = 2
LAYOUT_LINE_MAJOR = 1
DTYPES = {DTYPE_FLOAT32: np.dtype('<f4'), DTYPE_UINT8: np.dtype('u1')}

RESULT_COLUMNS = ['detector', 'dataset', 'direction', 'seed', 'auc', 'auc_td', 'auc_bs',
                  'lps', 'warmup_lines', 'config']
ROC_COLUMNS = ['threshold', 'fpr', 'tpr']
THROUGHPUT_COLUMNS = ['detector', 'pixels', 'bands', 'lines', 'repeats', 'lps_mean',
                      'lps_sd', 'host']


def _write_container(path, array, dtype_code, name):
    path = Path(path)
    encoded = name.encode('utf-8')
    lines, pixels, bands = array.shape
    header = HEADER.pack(MAGIC, VERSION, lines, pixels, bands, dtype_code,
                         LAYOUT_LINE_MAJOR, len(encoded))
    payload = np.ascontiguousarray(array, dtype=DTYPES[dtype_code]).tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write(header)
        handle.write(encoded)
        handle.write(payload)
    return path


def _read_container(path, expected_dtype):
    raw = Path(path).read_bytes()
    if len(raw) < HEADER.size:
        raise DataFormatError(f"{path}: truncated header", offset=len(raw))
    magic, version, lines, pixels, bands, dtype_code, layout, name_len = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}", offset=4)
    for offset, label, value in ((6, 'lines', lines), (10, 'pixels', pixels), (14, 'bands', bands)):
        if value < 1:
            raise DataFormatError(f"{path}: header declares {label}=0", offset=offset)
    if dtype_code not in DTYPES:
        raise DataFormatError(f"{path}: unsupported dtype code {dtype_code}", offset=18)
    if dtype_code != expected_dtype:
        raise DataFormatError(
            f"{path}: dtype code {dtype_code}, expected {expected_dtype}", offset=18)
    if layout != LAYOUT_LINE_MAJOR:
        raise DataFormatError(f"{path}: unsupported layout code {layout}", offset=19)

    name_end = HEADER.size + name_len
    if len(raw) < name_end:
        raise DataFormatError(f"{path}: truncated name", offset=len(raw))
    try:
        name = raw[HEADER.size:name_end].decode('utf-8')
    except UnicodeDecodeError as exc:
        raise DataFormatError(f"{path}: name is not UTF-8", offset=HEADER.size + exc.start)

    dtype = DTYPES[dtype_code]
    expected = lines * pixels * bands * dtype.itemsize
    actual = len(raw) - name_end
    if actual != expected:
        raise DataFormatError(
            f"{path}: payload is {actual} bytes, header declares {expected}", offset=name_end)
    array = np.frombuffer(raw, dtype=dtype, offset=name_end).reshape(lines, pixels, bands)
    return array, name, name_end


def write_cube(path, cube):
    return _write_container(path, cube.data, DTYPE_FLOAT32, cube.name)


def read_cube(path):
    array, name, payload_start = _read_container(path, DTYPE_FLOAT32)
    bad = np.flatnonzero(~np.isfinite(array.ravel()))
    if bad.size:
        raise DataFormatError(f"{path}: non-finite value in payload",
                              offset=payload_start + int(bad[0]) * 4)
    return DataCube(array, name=name)


def write_mask(path, mask, name='mask'):
    return _write_container(path, mask.data[:, :, None], DTYPE_UINT8, name)


def read_mask(path, cube=None):
    array, _, payload_start = _read_container(path, DTYPE_UINT8)
    if array.shape[2] != 1:
        raise DataFormatError(f"{path}: mask must have bands=1, got {array.shape[2]}", offset=14)
    bad = np.flatnonzero(array.ravel() > 1)
    if bad.size:
        raise DataFormatError(f"{path}: mask value {array.ravel()[bad[0]]} is not 0 or 1",
                              offset=payload_start + int(bad[0]))
    mask = GroundTruthMask(array[:, :, 0])
    if cube is not None:
        mask.check_against(cube)
    return mask


def write_heatmap(path, scored_lines, lines, pixels, direction='forward', score_field='norm',
                  name='heatmap'):
    """Per-pixel scores as a bands=1 cube in native line order; unscored lines stay 0."""
    heat = np.zeros((lines, pixels), dtype=np.float32)
    for line in scored_lines:
        if line.p != pixels or not 0 <= line.index < lines:
            raise ShapeMismatchError(f"scored line {line.index} does not fit {lines} x {pixels}")
        heat[line.index] = line.norm_scores if score_field == 'norm' else line.raw_scores
    if direction == FLIPPED:
        heat = heat[::-1]
    return _write_container(path, heat[:, :, None], DTYPE_FLOAT32, name)


def read_heatmap(path):
    array, name, _ = _read_container(path, DTYPE_FLOAT32)
    if array.shape[2] != 1:
        raise DataFormatError(f"{path}: heatmap must have bands=1", offset=14)
    return array[:, :, 0], name


def _format_cell(value, digits=4):
    if value is None:
        return ''
    if isinstance(value, float):
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return f"{value:.{digits}f}"
    return value


def write_scores_csv(path, records, aggregate=True):
    """
    Results table, one row per run, then one mean±sd row per
    (detector, dataset, direction) group when aggregate is set.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(RESULT_COLUMNS)
        for record in records:
            writer.writerow([
                record.detector, record.dataset, record.direction, record.seed,
                _format_cell(record.auc), _format_cell(record.auc_td), _format_cell(record.auc_bs),
                _format_cell(record.lps, 2), record.warmup_lines,
                json.dumps(record.config, sort_keys=True),
            ])
        if aggregate:
            for (detector, dataset, direction), means, sds in aggregate_records(records):
                cells = []
                for name in ('auc', 'auc_td', 'auc_bs', 'lps'):
                    digits = 2 if name == 'lps' else 4
                    if means[name] is None:
                        cells.append('')
                    else:
                        cells.append(f"{means[name]:.{digits}f}±{sds[name]:.{digits}f}")
                writer.writerow([detector, dataset, direction, 'mean±sd', *cells,
                                 means['warmup_lines'], ''])
    return path


def write_roc_csv(path, roc):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(ROC_COLUMNS)
        for threshold, fpr, tpr in zip(roc.thresholds, roc.fpr, roc.tpr):
            writer.writerow([_format_cell(float(threshold), 8), f"{fpr:.8f}", f"{tpr:.8f}"])
    return path


def write_mean_roc_csv(path, grid, tpr_mean, tpr_sd):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(['fpr', 'tpr_mean', 'tpr_sd'])
        for row in zip(grid, tpr_mean, tpr_sd):
            writer.writerow([f"{value:.6f}" for value in row])
    return path


def host_label():
    return f"{platform.node()} {platform.machine()} {platform.processor()}".strip()


def write_throughput_csv(path, reports):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as handle:
        writer = csv.writer(handle)
        writer.writerow(THROUGHPUT_COLUMNS)
        for report in reports:
            row = asdict(report) if is_dataclass(report) else dict(report)
            writer.writerow([_format_cell(row[column], 3) for column in THROUGHPUT_COLUMNS])
    return path


def export_results_xlsx(path, runs, title='Detection Results'):
    """Workbook with a title row, a filled header row and one row per run"""
    wb = Workbook()
    ws = wb.active
    ws.title = 'Runs'

    # Header
    ws['A1'] = title
    ws['A1'].font = Font(size=16, bold=True)
    ws.merge_cells(start_row=1, start_column=1, end_row=1, end_column=len(RESULT_COLUMNS) - 1)

    header_fill = PatternFill(start_color='4472C4', end_color='4472C4', fill_type='solid')
    header_font = Font(bold=True, color='FFFFFF')
    columns = RESULT_COLUMNS[:-1]
    for col, name in enumerate(columns, start=1):
        cell = ws.cell(row=3, column=col, value=name)
        cell.fill = header_fill
        cell.font = header_font

    for row, run in enumerate(runs, start=4):
        for col, name in enumerate(columns, start=1):
            ws.cell(row=row, column=col, value=getattr(run, name))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(path)
    return path


ENVI_DTYPES = {1: 'u1', 2: 'i2', 3: 'i4', 4: 'f4', 5: 'f8', 12: 'u2'}


def parse_envi_header(header_path):
    """key = value pairs of an ENVI-style text header, keys lower-cased"""
    fields = {}
    for raw_line in Path(header_path).read_text().splitlines():
        if '=' not in raw_line:
            continue
        key, value = raw_line.split('=', 1)
        fields[key.strip().lower()] = value.strip().strip('{}').strip()
    return fields


def import_bil(raw_path, header_path, name=None):
    """Convert an interleaved raw image with an ENVI-style header into a DataCube."""
    fields = parse_envi_header(header_path)
    try:
        samples = int(fields['samples'])
        lines = int(fields['lines'])
        bands = int(fields['bands'])
        code = int(fields.get('data type', 4))
    except (KeyError, ValueError) as exc:
        raise DataFormatError(f"{header_path}: missing or invalid header field {exc}")
    if code not in ENVI_DTYPES:
        raise DataFormatError(f"{header_path}: unsupported data type {code}")
    interleave = fields.get('interleave', 'bil').lower()
    endian = '>' if fields.get('byte order', '0') == '1' else '<'
    dtype = np.dtype(endian + ENVI_DTYPES[code]) if code != 1 else np.dtype('u1')

    offset = int(fields.get('header offset', 0))
    values = np.fromfile(raw_path, dtype=dtype, offset=offset)
    if values.size != samples * lines * bands:
        raise DataFormatError(
            f"{raw_path}: {values.size} values, header declares {samples * lines * bands}",
            offset=offset)
    if interleave == 'bil':
        data = values.reshape(lines, bands, samples).transpose(0, 2, 1)
    elif interleave == 'bip':
        data = values.reshape(lines, samples, bands)
    elif interleave == 'bsq':
        data = values.reshape(bands, lines, samples).transpose(1, 2, 0)
    else:
        raise DataFormatError(f"{header_path}: unknown interleave {interleave!r}")
    logger.info("imported %s (%s, %d x %d x %d)", raw_path, interleave, lines, samples, bands)
    return DataCube(data.astype(np.float32), name=name or Path(raw_path).stem)
