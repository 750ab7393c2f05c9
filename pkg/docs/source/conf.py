# -*- coding: utf-8 -*-
#
# fastbench documentation build configuration file
#
# This file is execfile()d with the current directory set to its containing dir.

import datetime
import os
import sys

from importlib.metadata import PackageNotFoundError
from importlib.metadata import version as get_version

sys.path.insert(0, os.path.abspath('../..'))

# -- General configuration -----------------------------------------------------

needs_sphinx = "1.8"

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.doctest",
    "sphinx.ext.intersphinx",
    "sphinx.ext.viewcode",
    "sphinx.ext.mathjax",
    "sphinx.ext.napoleon",
    "sphinx_click",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "fastbench"
author = "FastBench Authors"

try:
    release = get_version(project)
except PackageNotFoundError:
    from fastbench.__about__ import __version__ as release
version = '.'.join(release.split('.')[:2])
this_year = datetime.date.today().year
copyright = "%s, %s" % (this_year, author)

exclude_patterns = []
pygments_style = "sphinx"

# keep dataclass field order in the API pages
autodoc_member_order = "bysource"
napoleon_google_docstring = True

# -- Options for HTML output ---------------------------------------------------

html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "fastbenchdoc"

# -- Options for LaTeX and manual page output ----------------------------------

latex_documents = [
    ("index", "fastbench.tex", "fastbench Documentation", author, "manual"),
]
man_pages = [("index", "fastbench", "fastbench Documentation", [author], 1)]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable", None),
    "click": ("https://click.palletsprojects.com/en/8.1.x", None),
}
