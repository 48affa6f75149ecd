import json
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence
from subpower.errors import CatalogError

__all__ = ["get_directory", "read_json", "write_json", "catalog_path",
           "write_csv"]

CATALOG_DIR = Path(__file__).resolve().parent / 'catalogs'

def get_directory(path : str) -> Path:
    '''
    Creates the directory if it does not exist and then
    returns the corresponding Path object

    Parameters
    ----------
    path : str
        The path to the directory

    Returns
    -------
    Path
        Path object corresponding to the directory

    Raises
    ------
    ValueError
        Raised if there's an error in reading an
        existing directory or creating a new one
    '''
    try:
        Path(path).mkdir(parents=True, exist_ok=True)
        return Path(path)
    except OSError as e:
        raise ValueError(e)

def read_json(path : str) -> Any:
    """
    Parses a JSON file (algebra, term, instance or representation file).

    Raises
    ------
    CatalogError
        Raised if the file is not valid JSON
    OSError
        Raised if the file cannot be read
    """
    with open(path, 'r') as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as e:
            raise CatalogError('malformed JSON in {}: {}'.format(path, e))

def write_json(path : str, data : Any) -> None:
    """Writes data as JSON with sorted keys, so equal inputs give equal files."""
    with open(path, 'w') as f:
        json.dump(data, f, sort_keys=True)
        f.write('\n')

def catalog_path(name : str) -> str:
    """
    Resolves an algebra or term file: an existing path is returned as is,
    otherwise a bundled catalog name such as 'z2' or 'maltsev_p'.

    Raises
    ------
    CatalogError
        Raised if neither a file nor a bundled catalog of that name exists
    """
    if Path(name).is_file():
        return name
    bundled = CATALOG_DIR / (name if name.endswith('.json') else '{}.json'.format(name))
    if bundled.is_file():
        return str(bundled)
    raise CatalogError('no file or bundled catalog named {}'.format(name))

def write_csv(path : Optional[str], header : Sequence[str],
              rows : Sequence[Sequence[Any]]) -> str:
    """
    Formats rows as comma delimited lines under a header; writes them to
    `path` (overwriting) when given and returns the text.
    """
    lines = [','.join(header)] + [','.join(str(v) for v in row) for row in rows]
    text = '\n'.join(lines) + '\n'
    if path is not None:
        with open(path, 'w+') as f:
            f.write(text)
    return text
