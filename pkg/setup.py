#    This file is part of mkvlab
#
#    mkvlab is free software: you can redistribute it and/or modify
#    it under the terms of the GNU General Public License as published by
#    the Free Software Foundation, either version 3 of the License, or
#    (at your option) any later version.
#
#    mkvlab is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU General Public License for more details.
#
#    You should have received a copy of the GNU General Public License
#    along with mkvlab.  If not, see <http://www.gnu.org/licenses/>.

from setuptools import setup

setup(
    name="mkvlab",
    version="0.3.0",
    description="Numerical lab for mean-field CKLS and distribution dependent Vasicek models",
    license="GPLv3",
    packages=["mkvlab"],
    python_requires=">=3.8",
    install_requires=[
        "jsonschema>=3.2",
        "numpy>=1.19",
        "scipy>=1.6",
        "tqdm>=4.60",
    ],
    entry_points={
        "console_scripts": ["mkvlab=mkvlab.__main__:main"],
    },
)
